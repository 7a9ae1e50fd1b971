//! Divided differences: the recursive definition, the bidiagonal matrix-function
//! route for (nearly) confluent nodes, and a cached evaluator for symbol grids.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};
use crate::symbol::SymbolFunction;

/// Endpoints closer than this (relative to `max(1, max |node|)`) are treated as confluent.
pub const DEFAULT_CONFLUENCE_TOL: f64 = 1e-3;

/// Nodes closer than this share a Taylor block in the matrix-function route.
const BLOCK_GAP: f64 = 0.1;
const TAYLOR_REL_TOL: f64 = 1e-17;

fn node_scale(nodes: &[f64]) -> f64 {
    nodes.iter().fold(1.0f64, |m, x| m.max(x.abs()))
}

fn check(f: &SymbolFunction, nodes: &[f64]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidInput("divided difference needs at least one node".into()));
    }
    f.check_order(nodes.len() - 1)?;
    for &x in nodes {
        f.check_domain(x)?;
    }
    Ok(())
}

/// `f^{[n]}(l_0, ..., l_n)` by the recursion
/// `(f^{[n-1]}(l_1..l_n) - f^{[n-1]}(l_0..l_{n-1})) / (l_n - l_0)`,
/// memoized over contiguous node ranges. Ranges whose endpoints are within
/// `confluence_tol * max(1, max |l|)` go through [`divided_difference_opitz`].
pub fn divided_difference(f: &SymbolFunction, nodes: &[f64], confluence_tol: f64) -> Result<C64> {
    check(f, nodes)?;
    let n = nodes.len();
    let tol = confluence_tol * node_scale(nodes);
    // row[i] holds f[l_i .. l_{i+len}] for the current len
    let mut row: Vec<C64> = nodes.iter().map(|&x| f.value(x)).collect();
    for len in 1..n {
        let mut next = Vec::with_capacity(n - len);
        for i in 0..n - len {
            let (a, b) = (nodes[i], nodes[i + len]);
            if (b - a).abs() <= tol {
                let mut sub = nodes[i..=i + len].to_vec();
                sub.sort_by(f64::total_cmp);
                next.push(opitz_unchecked(f, &sub)?);
            } else {
                next.push((row[i + 1] - row[i]) / (b - a));
            }
        }
        row = next;
    }
    Ok(row[0])
}

/// `f^{[n]}` as the `(0, n)` entry of `f(J)`, `J` upper bidiagonal with the sorted
/// nodes on the diagonal and ones above it. `f(J)` is evaluated blockwise:
/// Taylor series on clusters of nearby nodes, Parlett's recurrence between clusters.
pub fn divided_difference_opitz(f: &SymbolFunction, nodes: &[f64]) -> Result<C64> {
    check(f, nodes)?;
    let mut sorted = nodes.to_vec();
    sorted.sort_by(f64::total_cmp);
    opitz_unchecked(f, &sorted)
}

/// Full table `F[i][j] = f[l_i, ..., l_j]` for sorted nodes.
pub fn opitz_table(f: &SymbolFunction, nodes: &[f64]) -> Result<CMat> {
    check(f, nodes)?;
    if nodes.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("nodes must be sorted ascending".into()));
    }
    bidiagonal_function(f, nodes)
}

fn opitz_unchecked(f: &SymbolFunction, sorted: &[f64]) -> Result<C64> {
    let t = bidiagonal_function(f, sorted)?;
    Ok(t[(0, sorted.len() - 1)])
}

fn bidiagonal_function(f: &SymbolFunction, x: &[f64]) -> Result<CMat> {
    let n = x.len();
    let mut j = CMat::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = C64::new(x[i], 0.0);
        if i + 1 < n {
            j[(i, i + 1)] = C64::new(1.0, 0.0);
        }
    }
    // contiguous blocks of nearby nodes
    let mut starts = vec![0];
    for i in 1..n {
        if x[i] - x[i - 1] > BLOCK_GAP {
            starts.push(i);
        }
    }
    let nb = starts.len();
    let range = |b: usize| starts[b]..if b + 1 < nb { starts[b + 1] } else { n };

    let mut fm = CMat::zeros(n, n);
    for b in 0..nb {
        let r = range(b);
        let blk = j.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let fb = block_taylor(f, &blk, &x[r.clone()])?;
        fm.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&fb);
    }
    for d in 1..nb {
        for bi in 0..nb - d {
            let bj = bi + d;
            let (ri, rj) = (range(bi), range(bj));
            let tii = j.view((ri.start, ri.start), (ri.len(), ri.len()));
            let tjj = j.view((rj.start, rj.start), (rj.len(), rj.len()));
            let tij = j.view((ri.start, rj.start), (ri.len(), rj.len()));
            let fii = fm.view((ri.start, ri.start), (ri.len(), ri.len())).into_owned();
            let fjj = fm.view((rj.start, rj.start), (rj.len(), rj.len())).into_owned();
            let mut rhs = &fii * tij - tij * &fjj;
            for bk in bi + 1..bj {
                let rk = range(bk);
                let fik = fm.view((ri.start, rk.start), (ri.len(), rk.len()));
                let tkj = j.view((rk.start, rj.start), (rk.len(), rj.len()));
                let tik = j.view((ri.start, rk.start), (ri.len(), rk.len()));
                let fkj = fm.view((rk.start, rj.start), (rk.len(), rj.len()));
                rhs += fik * tkj - tik * fkj;
            }
            let sol = sylvester_upper(&tii.into_owned(), &tjj.into_owned(), &rhs);
            fm.view_mut((ri.start, rj.start), (ri.len(), rj.len()))
                .copy_from(&sol);
        }
    }
    Ok(fm)
}

/// `f(T)` for an upper-triangular block whose eigenvalues `x` are close together,
/// by the Taylor series about their mean.
fn block_taylor(f: &SymbolFunction, t: &CMat, x: &[f64]) -> Result<CMat> {
    let m = x.len();
    if m == 1 {
        return Ok(CMat::from_element(1, 1, f.value(x[0])));
    }
    let mu = x.iter().sum::<f64>() / m as f64;
    let spread = x[m - 1] - x[0];
    let nmat = t - CMat::identity(m, m) * C64::new(mu, 0.0);
    if spread == 0.0 {
        // nilpotent shift: the series terminates
        let c = f.taylor(mu, m - 1);
        return Ok(horner(&c, &nmat));
    }
    // Blocks have spread below the Taylor gap, so 64 terms cover any entire function.
    let max_k = f.max_order().min(crate::symbol::JET_MAX_ORDER);
    let c = f.taylor(mu, max_k);
    let mut out = CMat::identity(m, m) * c[0];
    let mut pow = CMat::identity(m, m);
    let mut small_run = 0;
    let mut scale = c[0].norm();
    for (k, ck) in c.iter().enumerate().skip(1) {
        pow = &pow * &nmat;
        let term = &pow * *ck;
        let tn = term.norm();
        out += term;
        scale = scale.max(out.norm());
        if k >= m && tn <= TAYLOR_REL_TOL * scale.max(f64::MIN_POSITIVE) {
            small_run += 1;
            if small_run >= 2 {
                return Ok(out);
            }
        } else {
            small_run = 0;
        }
        if !tn.is_finite() {
            break;
        }
    }
    // Accept if the tail is negligible at the working precision, otherwise report.
    let last = c.last().map(|v| v.norm()).unwrap_or(0.0) * (spread + 1.0).powi(max_k as i32);
    if last <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        Ok(out)
    } else {
        Err(Error::NoConvergence {
            name: f.name().to_string(),
            order: max_k,
        })
    }
}

fn horner(c: &[C64], n: &CMat) -> CMat {
    let m = n.nrows();
    let mut out = CMat::zeros(m, m);
    for &ck in c.iter().rev() {
        out = &out * n + CMat::identity(m, m) * ck;
    }
    out
}

/// Solve `A X - X B = C` for upper-triangular `A`, `B` with disjoint spectra.
fn sylvester_upper(a: &CMat, b: &CMat, c: &CMat) -> CMat {
    let (p, q) = (a.nrows(), b.nrows());
    let mut x = CMat::zeros(p, q);
    for col in 0..q {
        let mut rhs: Vec<C64> = (0..p).map(|i| c[(i, col)]).collect();
        for k in 0..col {
            let bkc = b[(k, col)];
            if bkc != ZERO {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r += x[(i, k)] * bkc;
                }
            }
        }
        let shift = b[(col, col)];
        for i in (0..p).rev() {
            let mut s = rhs[i];
            for k in i + 1..p {
                s -= a[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / (a[(i, i)] - shift);
        }
    }
    x
}

/// Evaluator of `(l_0, ..., l_n) -> f^{[n]}(l_0, ..., l_n)` on a fixed finite set of
/// node values, with Taylor data cached per value. Nodes are sorted before
/// evaluation, so the result is exactly symmetric.
pub struct DividedDifferenceSymbol {
    f: SymbolFunction,
    order: usize,
    confluence_tol: f64,
    taylor: HashMap<u64, Vec<C64>>,
}

impl DividedDifferenceSymbol {
    /// `order` is `n`; `values` are all node values that may occur.
    pub fn new(f: &SymbolFunction, order: usize, values: &[f64], confluence_tol: f64) -> Result<Self> {
        f.check_order(order)?;
        let mut taylor = HashMap::new();
        for &v in values {
            f.check_domain(v)?;
            taylor
                .entry(v.to_bits())
                .or_insert_with(|| f.taylor(v, order));
        }
        let scale = node_scale(values);
        Ok(DividedDifferenceSymbol {
            f: f.clone(),
            order,
            confluence_tol: confluence_tol * scale,
            taylor,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn coeff(&self, x: f64, k: usize) -> C64 {
        match self.taylor.get(&x.to_bits()) {
            Some(c) => c[k],
            None => self.f.taylor(x, k)[k],
        }
    }

    /// `f^{[n]}` at the given nodes (length `order + 1`).
    pub fn eval(&self, nodes: &[f64]) -> C64 {
        let mut x: Vec<f64> = nodes.to_vec();
        x.sort_by(f64::total_cmp);
        let n = x.len();
        let mut row: Vec<C64> = x.iter().map(|&v| self.coeff(v, 0)).collect();
        for len in 1..n {
            for i in 0..n - len {
                let (a, b) = (x[i], x[i + len]);
                row[i] = if a == b {
                    self.coeff(a, len)
                } else if b - a <= self.confluence_tol {
                    opitz_unchecked(&self.f, &x[i..=i + len]).unwrap_or_else(|_| {
                        (row[i + 1] - row[i]) / (b - a)
                    })
                } else {
                    (row[i + 1] - row[i]) / (b - a)
                };
            }
        }
        row[0]
    }
}
