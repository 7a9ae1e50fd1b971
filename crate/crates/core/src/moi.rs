//! Multiple operator integrals over finite spectra:
//!
//! `T_phi^{H_0..H_n}(X_1..X_n) = sum phi(l_{i_0}, ..., l_{i_n}) P_{i_0} X_1 P_{i_1} ... X_n P_{i_n}`.
//!
//! The sum is evaluated in the eigenbases: with `U_j` diagonalizing `H_j`,
//! `Xt_j = U_{j-1}* X_j U_j` and
//! `Rt[a][b] = sum phi(l^0_a, l^1_{i_1}, ..., l^n_b) Xt_1[a][i_1] ... Xt_n[i_{n-1}][b]`,
//! so `T = U_0 Rt U_n*`. Rows of `Rt` are independent and summed in a fixed
//! lexicographic order, which keeps the result bit-identical for any thread count.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::divdiff::{DividedDifferenceSymbol, DEFAULT_CONFLUENCE_TOL};
use crate::error::{Error, Result};
use crate::linalg::{commutator, spectral_norm, trace, CMat, C64, ZERO};
use crate::sobolev::{op_norm, WeightOperator};
use crate::spectral::{apply_function, HermitianOperator, SpectralDecomposition};
use crate::symbol::SymbolFunction;
use crate::linalg::japanese;

pub type GenericSymbol = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;

/// Symbol of an MOI: a divided difference `f^{[n]}` or an arbitrary function of `n+1` reals.
#[derive(Clone)]
pub enum Symbol {
    DividedDifference(SymbolFunction),
    Generic(GenericSymbol),
}

impl Symbol {
    pub fn generic<F: Fn(&[f64]) -> C64 + Send + Sync + 'static>(f: F) -> Self {
        Symbol::Generic(Arc::new(f))
    }
}

impl std::fmt::Debug for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Symbol::DividedDifference(g) => write!(f, "DividedDifference({})", g.name()),
            Symbol::Generic(_) => write!(f, "Generic"),
        }
    }
}

/// Owned MOI data.
#[derive(Clone, Debug)]
pub struct MoiProblem {
    pub symbol: Symbol,
    pub h_ops: Vec<HermitianOperator>,
    pub x_ops: Vec<CMat>,
}

impl MoiProblem {
    pub fn new(symbol: Symbol, h_ops: Vec<HermitianOperator>, x_ops: Vec<CMat>) -> Result<Self> {
        let p = MoiProblem { symbol, h_ops, x_ops };
        p.validate()?;
        Ok(p)
    }

    /// `T_{f^{[n]}}^{H,...,H}(X_1, ..., X_n)`.
    pub fn divided_difference(f: &SymbolFunction, h: &HermitianOperator, x_ops: Vec<CMat>) -> Result<Self> {
        let h_ops = vec![h.clone(); x_ops.len() + 1];
        Self::new(Symbol::DividedDifference(f.clone()), h_ops, x_ops)
    }

    pub fn order(&self) -> usize {
        self.x_ops.len()
    }

    fn validate(&self) -> Result<()> {
        if self.h_ops.len() != self.x_ops.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} operators H_j for {} arguments X_j",
                self.h_ops.len(),
                self.x_ops.len()
            )));
        }
        let d = self.h_ops[0].dim();
        for h in &self.h_ops {
            if h.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: h.dim() });
            }
        }
        for x in &self.x_ops {
            crate::linalg::check_square(x, d)?;
        }
        Ok(())
    }
}

pub fn moi_evaluate(p: &MoiProblem) -> Result<CMat> {
    p.validate()?;
    let hs: Vec<&HermitianOperator> = p.h_ops.iter().collect();
    let xs: Vec<&CMat> = p.x_ops.iter().collect();
    moi(&p.symbol, &hs, &xs)
}

/// `T_{f^{[n]}}^{H_0..H_n}(X_1..X_n)` from borrowed data.
pub fn moi_dd(f: &SymbolFunction, hs: &[&HermitianOperator], xs: &[&CMat]) -> Result<CMat> {
    moi(&Symbol::DividedDifference(f.clone()), hs, xs)
}

/// `T_{f^{[n]}}^{H,...,H}(X_1..X_n)`.
pub fn moi_dd_same(f: &SymbolFunction, h: &HermitianOperator, xs: &[&CMat]) -> Result<CMat> {
    let hs = vec![h; xs.len() + 1];
    moi_dd(f, &hs, xs)
}

enum Evaluator {
    Dd(DividedDifferenceSymbol),
    Generic(GenericSymbol),
}

impl Evaluator {
    #[inline]
    fn eval(&self, nodes: &[f64]) -> C64 {
        match self {
            Evaluator::Dd(d) => d.eval(nodes),
            Evaluator::Generic(g) => g(nodes),
        }
    }
}

pub fn moi(symbol: &Symbol, hs: &[&HermitianOperator], xs: &[&CMat]) -> Result<CMat> {
    let n = xs.len();
    if hs.len() != n + 1 {
        return Err(Error::InvalidInput(format!("{} operators H_j for {n} arguments", hs.len())));
    }
    let d = hs[0].dim();
    for h in hs {
        if h.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: h.dim() });
        }
    }
    for x in xs {
        crate::linalg::check_square(x, d)?;
    }
    let eigs: Vec<&SpectralDecomposition> = hs.iter().map(|h| h.eig()).collect::<Result<_>>()?;
    let lam: Vec<Vec<f64>> = eigs.iter().map(|e| e.column_values()).collect();
    let ev = match symbol {
        Symbol::DividedDifference(f) => {
            let all: Vec<f64> = eigs.iter().flat_map(|e| e.eigenvalues.iter().copied()).collect();
            Evaluator::Dd(DividedDifferenceSymbol::new(f, n, &all, DEFAULT_CONFLUENCE_TOL)?)
        }
        Symbol::Generic(g) => Evaluator::Generic(g.clone()),
    };
    if n == 0 {
        return Ok(eigs[0].apply(|x| ev.eval(&[x])));
    }
    // nonzero entries of each row of Xt_j, so that sparse arguments skip whole subtrees
    let xt: Vec<Vec<Vec<(usize, C64)>>> = (0..n)
        .map(|j| {
            let m = eigs[j].to_eigenbasis(xs[j], eigs[j + 1]);
            (0..d)
                .map(|a| (0..d).filter_map(|b| (m[(a, b)] != ZERO).then(|| (b, m[(a, b)]))).collect())
                .collect()
        })
        .collect();
    let rows: Vec<Vec<C64>> = (0..d)
        .into_par_iter()
        .map(|a| {
            let mut out = vec![ZERO; d];
            let mut nodes = vec![0.0; n + 1];
            nodes[0] = lam[0][a];
            walk(&ev, &lam, &xt, 1, a, ONE_C, &mut nodes, &mut out);
            out
        })
        .collect();
    let rt = CMat::from_fn(d, d, |a, b| rows[a][b]);
    Ok(eigs[0].from_eigenbasis(&rt, eigs[n]))
}

const ONE_C: C64 = C64::new(1.0, 0.0);

#[allow(clippy::too_many_arguments)]
fn walk(
    ev: &Evaluator,
    lam: &[Vec<f64>],
    xt: &[Vec<Vec<(usize, C64)>>],
    level: usize,
    prev: usize,
    w: C64,
    nodes: &mut [f64],
    out: &mut [C64],
) {
    let n = xt.len();
    let row = &xt[level - 1][prev];
    if level == n {
        for &(b, v) in row {
            nodes[n] = lam[n][b];
            out[b] += ev.eval(nodes) * (w * v);
        }
    } else {
        for &(i, v) in row {
            nodes[level] = lam[level][i];
            walk(ev, lam, xt, level + 1, i, w * v, nodes, out);
        }
    }
}

/// Coefficients of the fourth-order central stencil for the `n`-th derivative.
fn stencil(n: usize) -> Result<(Vec<i32>, Vec<f64>)> {
    Ok(match n {
        0 => (vec![0], vec![1.0]),
        1 => (vec![-2, -1, 0, 1, 2], vec![1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0]),
        2 => (vec![-2, -1, 0, 1, 2], vec![-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0]),
        3 => (
            vec![-3, -2, -1, 0, 1, 2, 3],
            vec![1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0],
        ),
        _ => {
            return Err(Error::BadIndex {
                index: n,
                valid: "0..=3".into(),
            })
        }
    })
}

/// `|| FD_n(t -> f(H + tV); h) / n! - T_{f^{[n]}}^{H..H}(V..V) ||_2` with a
/// fourth-order central stencil.
pub fn derivative_identity_residual(
    f: &SymbolFunction,
    h: &HermitianOperator,
    v: &HermitianOperator,
    n: usize,
    step: f64,
) -> Result<f64> {
    let (offsets, weights) = stencil(n)?;
    f.check_order(n + 2)?;
    if v.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: v.dim() });
    }
    let d = h.dim();
    if n == 0 {
        return Ok(0.0);
    }
    // Increments f(H + khV) - f(H) = T^{H+khV,H}(khV) avoid the cancellation of
    // subtracting nearby matrix functions, which otherwise floors the residual near h = 1e-3.
    let increment = |k: i32| -> Result<CMat> {
        let kv = v.matrix() * C64::new(k as f64 * step, 0.0);
        let ht = HermitianOperator::new(h.matrix() + &kv)?;
        moi_dd(f, &[&ht, h], &[&kv])
    };
    let mut fd = CMat::zeros(d, d);
    for (&o, &w) in offsets.iter().zip(&weights) {
        if o <= 0 || w == 0.0 {
            continue;
        }
        let (gp, gm) = (increment(o)?, increment(-o)?);
        let pair = if n % 2 == 0 { gp + gm } else { gp - gm };
        fd += pair * C64::new(w, 0.0);
    }
    let scale = step.powi(n as i32) * crate::jet::factorial(n);
    fd /= C64::new(scale, 0.0);
    let vs: Vec<&CMat> = vec![v.matrix(); n];
    let t = moi_dd_same(f, h, &vs)?;
    Ok(spectral_norm(&(fd - t)))
}

/// Which identity to test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IdentityKind {
    /// `T(aX_1, ..) - a T(X_1, ..) = T^{H_0,H_0,..}([H_0, a], X_1, ..)`.
    Left,
    /// `T(.., X_j, aX_{j+1}, ..) - T(.., X_j a, X_{j+1}, ..) = T^{..H_j,H_j..}(.., X_j, [H_j, a], X_{j+1}, ..)`, `1 <= j <= n-1`.
    Middle(usize),
    /// `T(..)a - T(.., X_n a) = T^{..,H_n,H_n}(.., X_n, [H_n, a])`.
    Right,
    /// `T^{..A..} - T^{..B..} = T^{..A,B..}(X_1..X_j, A - B, X_{j+1}..)` at slot `j`.
    Perturbation(usize),
    /// `f(H + V) - f(H) = T^{H+V,H}(V)`.
    Loewner,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub residual: f64,
    /// Largest norm among the terms on both sides.
    pub scale: f64,
    pub relative: f64,
}

impl IdentityReport {
    fn new(lhs_terms: &[&CMat], rhs: &CMat) -> Self {
        let lhs = lhs_terms
            .iter()
            .skip(1)
            .fold(lhs_terms[0].clone(), |acc, m| acc - *m);
        let residual = spectral_norm(&(lhs - rhs));
        let scale = lhs_terms
            .iter()
            .map(|m| spectral_norm(m))
            .chain(std::iter::once(spectral_norm(rhs)))
            .fold(0.0, f64::max);
        IdentityReport {
            residual,
            scale,
            relative: if scale > 0.0 { residual / scale } else { residual },
        }
    }
}

/// Extra data for an identity: the multiplier `a` for the commutator kinds, the
/// perturbation `V` for Loewner, or the pair `(A, B)` for the perturbation kind.
#[derive(Clone, Debug)]
pub enum IdentityArg {
    Multiplier(CMat),
    Pair(HermitianOperator, HermitianOperator),
}

/// Places `a` immediately right of slot `j` (`right = true`) or immediately left of it.
fn with_a(xs: &[&CMat], a: &CMat, j: usize, right: bool) -> (Vec<CMat>, Option<bool>) {
    // Returns the modified arguments and, when `a` falls outside the argument list,
    // whether it multiplies the whole integral from the right (`Some(true)`) or left.
    let n = xs.len();
    let mut out: Vec<CMat> = xs.iter().map(|m| (*m).clone()).collect();
    if right {
        if j == n {
            return (out, Some(true));
        }
        out[j] = a * xs[j];
    } else {
        if j == 0 {
            return (out, Some(false));
        }
        out[j - 1] = xs[j - 1] * a;
    }
    (out, None)
}

pub fn identity_residual(
    kind: IdentityKind,
    f: &SymbolFunction,
    h_ops: &[HermitianOperator],
    x_ops: &[CMat],
    arg: &IdentityArg,
) -> Result<IdentityReport> {
    let n = x_ops.len();
    let xs: Vec<&CMat> = x_ops.iter().collect();
    let hs: Vec<&HermitianOperator> = h_ops.iter().collect();
    match kind {
        IdentityKind::Loewner => {
            let v = match arg {
                IdentityArg::Multiplier(v) => v,
                _ => return Err(Error::InvalidInput("Loewner identity needs V".into())),
            };
            let h = h_ops
                .first()
                .ok_or_else(|| Error::InvalidInput("Loewner identity needs H".into()))?;
            let hv = HermitianOperator::new(h.matrix() + v)?;
            let lhs1 = apply_function(f, &hv)?;
            let lhs2 = apply_function(f, h)?;
            let rhs = moi_dd(f, &[&hv, h], &[v])?;
            Ok(IdentityReport::new(&[&lhs1, &lhs2], &rhs))
        }
        IdentityKind::Perturbation(j) => {
            if j > n {
                return Err(Error::BadIndex { index: j, valid: format!("0..={n}") });
            }
            let (a, b) = match arg {
                IdentityArg::Pair(a, b) => (a, b),
                _ => return Err(Error::InvalidInput("perturbation identity needs (A, B)".into())),
            };
            let mut ha = hs.clone();
            ha[j] = a;
            let mut hb = hs.clone();
            hb[j] = b;
            let lhs1 = moi_dd(f, &ha, &xs)?;
            let lhs2 = moi_dd(f, &hb, &xs)?;
            let mut h2 = hs.clone();
            h2[j] = a;
            h2.insert(j + 1, b);
            let diff = a.matrix() - b.matrix();
            let mut x2 = xs.clone();
            x2.insert(j, &diff);
            let rhs = moi_dd(f, &h2, &x2)?;
            Ok(IdentityReport::new(&[&lhs1, &lhs2], &rhs))
        }
        IdentityKind::Left | IdentityKind::Middle(_) | IdentityKind::Right => {
            let j = match kind {
                IdentityKind::Left => 0,
                IdentityKind::Right => n,
                IdentityKind::Middle(j) => {
                    if j == 0 || j >= n {
                        return Err(Error::BadIndex {
                            index: j,
                            valid: format!("1..={}", n.saturating_sub(1)),
                        });
                    }
                    j
                }
                _ => unreachable!(),
            };
            let a = match arg {
                IdentityArg::Multiplier(a) => a,
                _ => return Err(Error::InvalidInput("commutator identity needs a".into())),
            };
            if hs.len() != n + 1 {
                return Err(Error::InvalidInput(format!("{} operators H_j for {n} arguments", hs.len())));
            }
            let side = |right: bool| -> Result<CMat> {
                let (args, outside) = with_a(&xs, a, j, right);
                let refs: Vec<&CMat> = args.iter().collect();
                let t = moi_dd(f, &hs, &refs)?;
                Ok(match outside {
                    Some(true) => t * a,
                    Some(false) => a * t,
                    None => t,
                })
            };
            let lhs1 = side(true)?;
            let lhs2 = side(false)?;
            let comm = commutator(hs[j].matrix(), a);
            let mut h2 = hs.clone();
            h2.insert(j, hs[j]);
            let mut x2 = xs.clone();
            x2.insert(j, &comm);
            let rhs = moi_dd(f, &h2, &x2)?;
            Ok(IdentityReport::new(&[&lhs1, &lhs2], &rhs))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormBoundReport {
    pub lhs: f64,
    pub rhs_factor: f64,
    pub fitted_c: f64,
    /// Intermediate levels `s_1..s_n` at which each `X_j` was measured.
    pub levels: Vec<f64>,
    /// Total order `sum r_j + sum beta_j h_j` of the left-hand side.
    pub total_order: f64,
}

/// Compares `||T||_{s + total -> s}` with `sup |phi| prod <l_j>^{-beta_j} * prod ||X_j||_{s_j + r_j -> s_j}`.
///
/// Levels telescope from the right: the input level is `s + total`; each spectral
/// factor `j` lowers it by `beta_j h_j` and each `X_j` by `r_j`.
pub fn moi_norm_bound_check(
    p: &MoiProblem,
    w: &WeightOperator,
    s: f64,
    beta: &[f64],
    r: &[f64],
    h: Option<&[f64]>,
) -> Result<NormBoundReport> {
    let n = p.order();
    if beta.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, found: beta.len() });
    }
    if r.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: r.len() });
    }
    let ones = vec![1.0; n + 1];
    let h = h.unwrap_or(&ones);
    if h.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, found: h.len() });
    }
    let total: f64 = r.iter().sum::<f64>() + beta.iter().zip(h).map(|(b, h)| b * h).sum::<f64>();
    let t = moi_evaluate(p)?;
    let lhs = op_norm(&t, s, total, w)?;
    let mut level = s + total;
    let mut levels = vec![0.0; n];
    for j in (1..=n).rev() {
        level -= beta[j] * h[j];
        level -= r[j - 1];
        levels[j - 1] = level;
    }
    let mut xnorm = 1.0;
    for j in 0..n {
        xnorm *= op_norm(&p.x_ops[j], levels[j], r[j], w)?;
    }
    let eigs: Vec<&SpectralDecomposition> = p.h_ops.iter().map(|h| h.eig()).collect::<Result<_>>()?;
    let sup = symbol_weighted_sup(&p.symbol, &eigs, beta)?;
    let rhs_factor = sup * xnorm;
    Ok(NormBoundReport {
        lhs,
        rhs_factor,
        fitted_c: if rhs_factor > 0.0 { lhs / rhs_factor } else { f64::INFINITY },
        levels,
        total_order: total,
    })
}

/// `max |phi(l_0..l_n)| prod_j <l_j>^{-beta_j}` over the product of spectra.
fn symbol_weighted_sup(symbol: &Symbol, eigs: &[&SpectralDecomposition], beta: &[f64]) -> Result<f64> {
    let n = eigs.len() - 1;
    let ev = match symbol {
        Symbol::DividedDifference(f) => {
            let all: Vec<f64> = eigs.iter().flat_map(|e| e.eigenvalues.iter().copied()).collect();
            Evaluator::Dd(DividedDifferenceSymbol::new(f, n, &all, DEFAULT_CONFLUENCE_TOL)?)
        }
        Symbol::Generic(g) => Evaluator::Generic(g.clone()),
    };
    let sizes: Vec<usize> = eigs.iter().map(|e| e.eigenvalues.len()).collect();
    let mut idx = vec![0usize; n + 1];
    let mut nodes = vec![0.0; n + 1];
    let mut best: f64 = 0.0;
    loop {
        let mut wgt = 1.0;
        for j in 0..=n {
            nodes[j] = eigs[j].eigenvalues[idx[j]];
            wgt *= japanese(nodes[j]).powf(-beta[j]);
        }
        best = best.max(ev.eval(&nodes).norm() * wgt);
        let mut k = n + 1;
        loop {
            if k == 0 {
                return Ok(best);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JloReport {
    pub simplex: C64,
    pub moi: C64,
    pub residual: f64,
}

/// Compares the simplex integral
/// `int_{Sigma^n} Tr(eta a_0 e^{-t_0 D^2} [D, a_1] e^{-t_1 D^2} ... [D, a_n] e^{-t_n D^2}) dt`
/// (composite midpoint rule, `quad_pts` per cube direction, stick-breaking map)
/// with `(-1)^n Tr(eta a_0 T_{g^{[n]}}^{D^2..D^2}([D, a_1], .., [D, a_n]))`, `g(x) = e^{-x}`.
pub fn jlo_equality_residual(
    eta: &CMat,
    a_list: &[CMat],
    d: &HermitianOperator,
    n: usize,
    quad_pts: usize,
) -> Result<JloReport> {
    if a_list.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, found: a_list.len() });
    }
    let dim = d.dim();
    crate::linalg::check_square(eta, dim)?;
    for a in a_list {
        crate::linalg::check_square(a, dim)?;
    }
    if quad_pts == 0 {
        return Err(Error::InvalidInput("quad_pts must be positive".into()));
    }
    let brackets: Vec<CMat> = a_list[1..].iter().map(|a| commutator(d.matrix(), a)).collect();
    let lead = eta * &a_list[0];

    // MOI side
    let d2 = HermitianOperator::new(d.matrix() * d.matrix())?;
    let refs: Vec<&CMat> = brackets.iter().collect();
    let t = moi_dd_same(&SymbolFunction::exp_neg(), &d2, &refs)?;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let moi_val = trace(&(&lead * t)) * sign;

    // simplex side, in the eigenbasis of D
    let e = d.eig()?;
    let u = e.vectors();
    let sq: Vec<f64> = e.column_values().iter().map(|l| l * l).collect();
    let m0 = u.adjoint() * &lead * u;
    let bs: Vec<CMat> = brackets.iter().map(|b| u.adjoint() * b * u).collect();
    let total = quad_pts.pow(n as u32);
    let h = 1.0 / quad_pts as f64;
    let terms: Vec<C64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rem = flat;
            let mut ts = vec![0.0; n + 1];
            let mut left = 1.0;
            let mut jac = 1.0;
            for k in 1..=n {
                let i = rem % quad_pts;
                rem /= quad_pts;
                let uk = (i as f64 + 0.5) * h;
                ts[k] = uk * left;
                jac *= left;
                left -= ts[k];
            }
            ts[0] = left;
            let mut acc = m0.clone();
            scale_columns(&mut acc, &sq, ts[0]);
            for k in 1..=n {
                acc = &acc * &bs[k - 1];
                scale_columns(&mut acc, &sq, ts[k]);
            }
            trace(&acc) * jac
        })
        .collect();
    let vol = h.powi(n as i32);
    let simplex = terms.iter().fold(ZERO, |s, v| s + v) * vol;
    Ok(JloReport {
        simplex,
        moi: moi_val,
        residual: (simplex - moi_val).norm(),
    })
}

fn scale_columns(m: &mut CMat, sq: &[f64], t: f64) {
    for (j, &l2) in sq.iter().enumerate() {
        let s = (-t * l2).exp();
        for z in m.column_mut(j).iter_mut() {
            *z *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, random_hermitian, random_matrix, seeded_rng};

    #[test]
    fn order_zero_is_functional_calculus() {
        let mut rng = seeded_rng(2);
        let h = HermitianOperator::new(random_hermitian(&mut rng, 5, 1.0)).unwrap();
        let f = SymbolFunction::gauss(0.7);
        let t = moi_dd_same(&f, &h, &[]).unwrap();
        assert!((t - apply_function(&f, &h).unwrap()).norm() < 1e-13);
    }

    #[test]
    fn commuting_case_is_chain_rule() {
        let h = HermitianOperator::new(diag_real(&[0.5, -1.0, 2.0])).unwrap();
        let x1 = diag_real(&[1.0, 2.0, 3.0]);
        let x2 = diag_real(&[-1.0, 0.5, 2.0]);
        let f = SymbolFunction::sin();
        let t = moi_dd_same(&f, &h, &[&x1, &x2]).unwrap();
        for (i, l) in [0.5f64, -1.0, 2.0].iter().enumerate() {
            let want = -l.sin() / 2.0 * x1[(i, i)].re * x2[(i, i)].re;
            assert!((t[(i, i)].re - want).abs() < 1e-13);
        }
    }

    #[test]
    fn square_symbol_is_anticommutator() {
        let mut rng = seeded_rng(7);
        let h = HermitianOperator::new(random_hermitian(&mut rng, 6, 1.0)).unwrap();
        let x = random_matrix(&mut rng, 6, 1.0);
        let f = SymbolFunction::poly(vec![0.0, 0.0, 1.0]);
        let t = moi_dd_same(&f, &h, &[&x]).unwrap();
        let want = h.matrix() * &x + &x * h.matrix();
        assert!((t - want).norm() < 1e-12);
    }

    #[test]
    fn derivative_identity_examples() {
        let mut rng = seeded_rng(11);
        let h = HermitianOperator::new(random_hermitian(&mut rng, 6, 1.0)).unwrap();
        let zero = HermitianOperator::new(CMat::zeros(6, 6)).unwrap();
        for n in 1..=3 {
            let r = derivative_identity_residual(&SymbolFunction::exp(), &h, &zero, n, 1e-2).unwrap();
            assert!(r < 1e-12);
        }
        let v = HermitianOperator::new(random_hermitian(&mut rng, 6, 1.0)).unwrap();
        let cubic = SymbolFunction::poly(vec![1.0, -1.0, 0.5, 0.25]);
        for n in 1..=3 {
            let r = derivative_identity_residual(&cubic, &h, &v, n, 1e-1).unwrap();
            assert!(r < 1e-10, "n={n}: {r}");
        }
        let r = derivative_identity_residual(&SymbolFunction::exp(), &h, &v, 2, 1e-2).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn identity_examples() {
        let mut rng = seeded_rng(13);
        let h = HermitianOperator::new(random_hermitian(&mut rng, 5, 1.0)).unwrap();
        let v = random_hermitian(&mut rng, 5, 1.0);
        let sq = SymbolFunction::poly(vec![0.0, 0.0, 1.0]);
        let r = identity_residual(IdentityKind::Loewner, &sq, &[h.clone()], &[], &IdentityArg::Multiplier(v)).unwrap();
        assert!(r.residual < 1e-12);

        let xs = vec![random_matrix(&mut rng, 5, 1.0), random_matrix(&mut rng, 5, 1.0)];
        let hs = vec![h.clone(); 3];
        let one = CMat::identity(5, 5);
        let r = identity_residual(IdentityKind::Middle(1), &SymbolFunction::exp(), &hs, &xs, &IdentityArg::Multiplier(one))
            .unwrap();
        assert!(r.residual < 1e-12);
        assert!(matches!(
            identity_residual(IdentityKind::Middle(2), &SymbolFunction::exp(), &hs, &xs, &IdentityArg::Multiplier(CMat::identity(5, 5))),
            Err(Error::BadIndex { .. })
        ));
        let a = HermitianOperator::new(random_hermitian(&mut rng, 5, 1.0)).unwrap();
        let r = identity_residual(
            IdentityKind::Perturbation(1),
            &SymbolFunction::exp(),
            &hs,
            &xs,
            &IdentityArg::Pair(a.clone(), a),
        )
        .unwrap();
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn all_kinds_hold_on_random_data() {
        let mut rng = seeded_rng(17);
        let f = SymbolFunction::lorentz();
        let hs: Vec<HermitianOperator> = (0..4)
            .map(|_| HermitianOperator::new(random_hermitian(&mut rng, 6, 1.5)).unwrap())
            .collect();
        let xs: Vec<CMat> = (0..3).map(|_| random_matrix(&mut rng, 6, 1.0)).collect();
        let a = random_matrix(&mut rng, 6, 1.0);
        for kind in [IdentityKind::Left, IdentityKind::Middle(1), IdentityKind::Middle(2), IdentityKind::Right] {
            let r = identity_residual(kind, &f, &hs, &xs, &IdentityArg::Multiplier(a.clone())).unwrap();
            assert!(r.relative < 1e-9, "{kind:?}: {r:?}");
        }
        let pa = HermitianOperator::new(random_hermitian(&mut rng, 6, 1.5)).unwrap();
        let pb = HermitianOperator::new(random_hermitian(&mut rng, 6, 1.5)).unwrap();
        for j in 0..=3 {
            let r = identity_residual(IdentityKind::Perturbation(j), &f, &hs, &xs, &IdentityArg::Pair(pa.clone(), pb.clone()))
                .unwrap();
            assert!(r.relative < 1e-9, "{j}: {r:?}");
        }
    }

    #[test]
    fn norm_bound_trivial_case() {
        let h = HermitianOperator::new(diag_real(&[1.0, 2.0, 3.0])).unwrap();
        let p = MoiProblem::divided_difference(&SymbolFunction::constant(1.0), &h, vec![]).unwrap();
        let w = WeightOperator::diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let rep = moi_norm_bound_check(&p, &w, 0.5, &[0.0], &[], None).unwrap();
        assert!((rep.lhs - 1.0).abs() < 1e-14);
        assert!((rep.rhs_factor - 1.0).abs() < 1e-14);
        assert!((rep.fitted_c - 1.0).abs() < 1e-14);
    }

    #[test]
    fn jlo_order_zero_and_commuting() {
        let mut rng = seeded_rng(19);
        let d = HermitianOperator::new(random_hermitian(&mut rng, 4, 1.0)).unwrap();
        let eta = random_matrix(&mut rng, 4, 1.0);
        let a0 = random_matrix(&mut rng, 4, 1.0);
        let r = jlo_equality_residual(&eta, &[a0.clone()], &d, 0, 10).unwrap();
        assert!(r.residual < 1e-12);
        let f = SymbolFunction::poly(vec![0.3, 1.0, -0.2]);
        let comm = apply_function(&f, &d).unwrap();
        let r = jlo_equality_residual(&eta, &[a0, comm.clone(), comm], &d, 2, 10).unwrap();
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn jlo_converges_at_second_order() {
        let mut rng = seeded_rng(23);
        let d = HermitianOperator::new(random_hermitian(&mut rng, 4, 1.0)).unwrap();
        let eta = random_matrix(&mut rng, 4, 1.0);
        let a: Vec<CMat> = (0..2).map(|_| random_matrix(&mut rng, 4, 1.0)).collect();
        let r1 = jlo_equality_residual(&eta, &a, &d, 1, 64).unwrap();
        let r2 = jlo_equality_residual(&eta, &a, &d, 1, 128).unwrap();
        let slope = (r1.residual / r2.residual).log2();
        assert!((slope - 2.0).abs() < 0.2, "{slope}");
    }
}
