//! Heat traces and spectral actions of finite models with their perturbative
//! expansions, the theta-sum asymptotic, and Dirichlet series partial sums.
//!
//! The expansions are assembled in the eigenbasis of `D`, where `delta_{g(D)}`
//! acts entrywise as `X_ij -> (g_i - g_j) X_ij`. The products
//! `sum_{|m| = m} C_m delta^{m_1}(X) .. delta^{m_n}(X)` do not depend on `t`, so only
//! the diagonals of `P` times them are stored; every `t` is then a weighted sum
//! over the spectrum.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::{binomial, fit_remainders, multiset_coeff, OrderFit, TERM_GUARD};
use crate::fit::power_fit;
use crate::jet::factorial;
use crate::linalg::{identity, is_diagonal, CMat, C64, ZERO};
use crate::moi::moi_dd_same;
use crate::sobolev::WeightOperator;
use crate::spectral::{HermitianOperator, SpectralDecomposition};
use crate::symbol::SymbolFunction;

/// Finite stand-in for a spectral triple with a perturbation `V` and a multiplier `P`.
#[derive(Clone, Debug)]
pub struct SpectralTripleModel {
    d: HermitianOperator,
    v: HermitianOperator,
    p: CMat,
    theta: WeightOperator,
    perturbed: HermitianOperator,
}

impl SpectralTripleModel {
    pub fn new(d: HermitianOperator, v: HermitianOperator, p: CMat) -> Result<Self> {
        let n = d.dim();
        if v.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.dim() });
        }
        crate::linalg::check_square(&p, n)?;
        let e = d.eig()?;
        let theta = WeightOperator::new(HermitianOperator::new(e.apply(|l| C64::new((1.0 + l * l).sqrt(), 0.0)))?)?;
        let perturbed = HermitianOperator::new(d.matrix() + v.matrix())?;
        Ok(SpectralTripleModel { d, v, p, theta, perturbed })
    }

    /// `D = diag(1..=dim)`, `V = v0 * I`, `P = I`.
    pub fn diag_family(dim: usize, v0: f64) -> Result<Self> {
        let d: Vec<f64> = (1..=dim).map(|k| k as f64).collect();
        Self::new(
            HermitianOperator::from_real_diagonal(&d),
            HermitianOperator::from_real_diagonal(&vec![v0; dim]),
            identity(dim),
        )
    }

    pub fn dim(&self) -> usize {
        self.d.dim()
    }

    pub fn d(&self) -> &HermitianOperator {
        &self.d
    }

    pub fn v(&self) -> &HermitianOperator {
        &self.v
    }

    pub fn p(&self) -> &CMat {
        &self.p
    }

    /// `(1 + D^2)^{1/2}`.
    pub fn theta(&self) -> &WeightOperator {
        &self.theta
    }

    /// `D + V`.
    pub fn perturbed(&self) -> &HermitianOperator {
        &self.perturbed
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatKind {
    /// `Tr(P exp(-t (D+V)^2))`
    Square,
    /// `Tr(P exp(-t |D+V|))`
    Abs,
}

/// Real part of `sum_j g(l_j) (U* P U)_jj` over the decomposition `e`.
fn weighted_trace<G: Fn(f64) -> f64>(e: &SpectralDecomposition, p: &CMat, g: G) -> f64 {
    let pt = e.to_eigenbasis(p, e);
    e.column_values()
        .iter()
        .enumerate()
        .rev()
        .map(|(j, &l)| (pt[(j, j)] * g(l)).re)
        .sum()
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// Exact trace through the eigendecomposition of `D + V`. Returns the real part.
pub fn heat_trace_direct(model: &SpectralTripleModel, t: f64, kind: HeatKind) -> Result<f64> {
    check_t(t)?;
    let e = model.perturbed.eig()?;
    Ok(match kind {
        HeatKind::Square => weighted_trace(e, &model.p, |l| (-t * l * l).exp()),
        HeatKind::Abs => weighted_trace(e, &model.p, |l| (-t * l.abs()).exp()),
    })
}

/// `Tr(f(t(D+V)))`.
pub fn spectral_action_direct(model: &SpectralTripleModel, f: &SymbolFunction, t: f64) -> Result<f64> {
    let e = model.perturbed.eig()?;
    let mut s = 0.0;
    for &l in e.column_values().iter().rev() {
        f.check_domain(t * l)?;
        s += f.value(t * l).re;
    }
    Ok(s)
}

/// Number of `(m_1..m_n)` with `n, m <= order`, per truncation order.
fn term_counts(order: usize) -> Result<Vec<usize>> {
    let mut counts = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let mut total: u128 = 0;
        for n in 0..=k {
            for m in 0..=k {
                let c = if n == 0 { u128::from(m == 0) } else { multiset_coeff(n as u64, m as u64)? };
                total = total.saturating_add(c);
            }
        }
        if total > TERM_GUARD {
            return Err(Error::BlowupGuard { terms: total, limit: TERM_GUARD });
        }
        counts.push(total as usize);
    }
    Ok(counts)
}

/// `w[n][m][i] = (P L_{n,m})_ii / (n+m)!` with
/// `L_{n,m} = sum_{|m| = m} C_m X^{(m_1)} .. X^{(m_n)}` and `X^{(b)}_ij = (g_i - g_j)^b X_ij`.
///
/// `L` is built left to right: `L_{k+1, a+b} += binom(k + a + b, b) L_{k,a} X^{(b)}`.
fn weighted_diagonals(x: &CMat, g: &[f64], p: &CMat, order: usize) -> Result<Vec<Vec<Vec<C64>>>> {
    let d = g.len();
    let diag_of = |l: &CMat, n: usize, m: usize| -> Vec<C64> {
        let s = 1.0 / factorial(n + m);
        (0..d)
            .map(|i| (0..d).fold(ZERO, |acc, j| acc + p[(i, j)] * l[(j, i)]) * s)
            .collect()
    };
    let mut w = vec![vec![vec![ZERO; d]; order + 1]; order + 1];
    if is_diagonal(x) {
        // commuting data: every commutator vanishes and only L_{n,0} = X^n survives
        let xd: Vec<C64> = (0..d).map(|i| x[(i, i)]).collect();
        let mut pw = vec![C64::new(1.0, 0.0); d];
        for (n, wn) in w.iter_mut().enumerate() {
            wn[0] = (0..d).map(|i| p[(i, i)] * pw[i] / factorial(n)).collect();
            for (a, b) in pw.iter_mut().zip(&xd) {
                *a *= *b;
            }
        }
        return Ok(w);
    }
    let deltas: Vec<CMat> = (0..=order)
        .map(|b| CMat::from_fn(d, d, |i, j| x[(i, j)] * (g[i] - g[j]).powi(b as i32)))
        .collect();
    let mut level: Vec<Option<CMat>> = vec![None; order + 1];
    level[0] = Some(CMat::identity(d, d));
    w[0][0] = diag_of(level[0].as_ref().expect("set"), 0, 0);
    for k in 0..order {
        let next: Vec<Option<CMat>> = (0..=order)
            .into_par_iter()
            .map(|c| -> Result<Option<CMat>> {
                let mut acc: Option<CMat> = None;
                for a in 0..=c {
                    let Some(l) = &level[a] else { continue };
                    let b = c - a;
                    let coeff = binomial((k + c) as u64, b as u64)? as f64;
                    let term = l * &deltas[b] * C64::new(coeff, 0.0);
                    acc = Some(match acc {
                        Some(s) => s + term,
                        None => term,
                    });
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        level = next;
        for (m, l) in level.iter().enumerate() {
            if let Some(l) = l {
                w[k + 1][m] = diag_of(l, k + 1, m);
            }
        }
    }
    Ok(w)
}

/// Direct values, truncated expansions and remainders on a grid of `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceExpansion {
    pub t_grid: Vec<f64>,
    pub direct: Vec<f64>,
    /// `partial_sums[i][k]`: all terms with `n <= k` and `m <= k` at `t_grid[i]`.
    pub partial_sums: Vec<Vec<f64>>,
    pub remainders: Vec<Vec<f64>>,
    pub term_counts: Vec<usize>,
}

impl TraceExpansion {
    pub fn order(&self) -> usize {
        self.term_counts.len() - 1
    }

    /// Log-log slope of the remainder in `t` for each truncation order.
    pub fn fit(&self) -> Result<Vec<OrderFit>> {
        fit_remainders(&self.remainders, &self.t_grid)
    }
}

/// Evaluates `sum_{n,m <= k} term(n, m, t)` for every `k`, in parallel over `t`.
fn assemble<T, D>(t_grid: &[f64], order: usize, term: T, direct: D) -> Result<TraceExpansion>
where
    T: Fn(usize, usize, f64) -> f64 + Sync,
    D: Fn(f64) -> Result<f64> + Sync,
{
    for &t in t_grid {
        check_t(t)?;
    }
    let counts = term_counts(order)?;
    let rows: Vec<(f64, Vec<f64>)> = t_grid
        .par_iter()
        .map(|&t| {
            let table: Vec<Vec<f64>> = (0..=order).map(|n| (0..=order).map(|m| term(n, m, t)).collect()).collect();
            let partial = (0..=order)
                .map(|k| (0..=k).map(|n| (0..=k).map(|m| table[n][m]).sum::<f64>()).sum())
                .collect();
            Ok((direct(t)?, partial))
        })
        .collect::<Result<_>>()?;
    let direct: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let partial_sums: Vec<Vec<f64>> = rows.into_iter().map(|r| r.1).collect();
    let remainders = partial_sums
        .iter()
        .zip(&direct)
        .map(|(p, d)| p.iter().map(|v| (d - v).abs()).collect())
        .collect();
    Ok(TraceExpansion {
        t_grid: t_grid.to_vec(),
        direct,
        partial_sums,
        remainders,
        term_counts: counts,
    })
}

/// `sum_{n,m <= N} (-t)^{n+m} C/(n+m)! Tr(P A^{(m_1)} .. A^{(m_n)} exp(-t D^2))`
/// with `A = DV + VD + V^2` and `A^{(m)} = delta_{D^2}^m(A)`.
pub fn heat_trace_expansion(model: &SpectralTripleModel, order: usize, t_grid: &[f64]) -> Result<TraceExpansion> {
    term_counts(order)?;
    let e = model.d.eig()?;
    let lam = e.column_values();
    let vt = e.to_eigenbasis(model.v.matrix(), e);
    let v2 = if is_diagonal(&vt) {
        CMat::from_fn(lam.len(), lam.len(), |i, j| if i == j { vt[(i, i)] * vt[(i, i)] } else { ZERO })
    } else {
        &vt * &vt
    };
    let at = CMat::from_fn(lam.len(), lam.len(), |i, j| vt[(i, j)] * (lam[i] + lam[j]) + v2[(i, j)]);
    let g: Vec<f64> = lam.iter().map(|l| l * l).collect();
    let w = weighted_diagonals(&at, &g, &e.to_eigenbasis(&model.p, e), order)?;
    let term = |n: usize, m: usize, t: f64| {
        let s: C64 = w[n][m].iter().zip(&g).rev().map(|(c, gi)| c * (-t * gi).exp()).sum();
        (-t).powi((n + m) as i32) * s.re
    };
    assemble(t_grid, order, term, |t| heat_trace_direct(model, t, HeatKind::Square))
}

/// Smallest distance to zero tolerated in the spectra of `D` and `D + V` by [`abs_expansion`].
pub const ABS_GAP: f64 = 1e-8;

/// `sum_{n,m <= N} (-t)^{n+m} C/(n+m)! Tr(P delta_{|D|}^{m_1}(B) .. delta_{|D|}^{m_n}(B) exp(-t|D|))`
/// with `B = |D+V| - |D|`.
pub fn abs_expansion(model: &SpectralTripleModel, order: usize, t_grid: &[f64]) -> Result<TraceExpansion> {
    term_counts(order)?;
    let e = model.d.eig()?;
    let ep = model.perturbed.eig()?;
    for &l in e.eigenvalues.iter().chain(&ep.eigenvalues) {
        if l.abs() <= ABS_GAP {
            return Err(Error::SpectralGapViolation { eigenvalue: l, gap: ABS_GAP });
        }
    }
    let abs = |x: f64| C64::new(x.abs(), 0.0);
    let b = ep.apply(abs) - e.apply(abs);
    let bt = e.to_eigenbasis(&b, e);
    let g: Vec<f64> = e.column_values().iter().map(|l| l.abs()).collect();
    let w = weighted_diagonals(&bt, &g, &e.to_eigenbasis(&model.p, e), order)?;
    let term = |n: usize, m: usize, t: f64| {
        let s: C64 = w[n][m].iter().zip(&g).rev().map(|(c, gi)| c * (-t * gi).exp()).sum();
        (-t).powi((n + m) as i32) * s.re
    };
    assemble(t_grid, order, term, |t| heat_trace_direct(model, t, HeatKind::Abs))
}

/// Both forms of the expansion of `Tr(f(tD + tV))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralActionExpansion {
    /// `sum_{n,m <= N} t^{n+m} C/(n+m)! Tr(delta_D^{m_1}(V) .. delta_D^{m_n}(V) f^{(n+m)}(tD))`.
    pub expanded: TraceExpansion,
    /// `sum_{n <= N} t^n Tr(T^{tD}_{f^{[n]}}(V, .., V))`.
    pub moi_level: TraceExpansion,
    /// `|expanded - moi_level|` per `t` and order.
    pub mutual: Vec<Vec<f64>>,
}

/// Work bound for the MOI-level sums: estimated index paths per order.
pub const MOI_PATH_GUARD: f64 = 5e8;

pub fn spectral_action_expansion(
    model: &SpectralTripleModel,
    f: &SymbolFunction,
    order: usize,
    t_grid: &[f64],
) -> Result<SpectralActionExpansion> {
    f.check_order(2 * order + 3)?;
    term_counts(order)?;
    let e = model.d.eig()?;
    let lam = e.column_values();
    let vt = e.to_eigenbasis(model.v.matrix(), e);
    let dim = lam.len();
    let nnz = vt.iter().filter(|z| **z != ZERO).count() as f64 / dim as f64;
    let paths = dim as f64 * nnz.max(1.0).powi(order as i32);
    if paths > MOI_PATH_GUARD {
        return Err(Error::BlowupGuard { terms: paths as u128, limit: MOI_PATH_GUARD as u128 });
    }
    let w = weighted_diagonals(&vt, &lam, &identity(dim), order)?;
    let term = |n: usize, m: usize, t: f64| {
        let k = n + m;
        let s: C64 = w[n][m].iter().zip(&lam).rev().map(|(c, l)| c * f.derivative(k, t * l)).sum();
        t.powi(k as i32) * s.re
    };
    let direct = |t: f64| spectral_action_direct(model, f, t);
    let expanded = assemble(t_grid, order, term, direct)?;

    let vm = model.v.matrix().clone();
    let moi_terms: Vec<Vec<f64>> = t_grid
        .iter()
        .map(|&t| {
            let td = HermitianOperator::new(model.d.matrix() * C64::new(t, 0.0))?;
            (0..=order)
                .map(|n| {
                    let xs = vec![&vm; n];
                    let m = moi_dd_same(f, &td, &xs)?;
                    Ok(t.powi(n as i32) * crate::linalg::trace(&m).re)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let moi_partial: Vec<Vec<f64>> = moi_terms
        .iter()
        .map(|row| row.iter().scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        }).collect())
        .collect();
    let moi_remainders = moi_partial
        .iter()
        .zip(&expanded.direct)
        .map(|(p, d)| p.iter().map(|v| (d - v).abs()).collect())
        .collect();
    let mutual = expanded
        .partial_sums
        .iter()
        .zip(&moi_partial)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect())
        .collect();
    let moi_level = TraceExpansion {
        t_grid: t_grid.to_vec(),
        direct: expanded.direct.clone(),
        partial_sums: moi_partial,
        remainders: moi_remainders,
        term_counts: (0..=order).map(|k| k + 1).collect(),
    };
    Ok(SpectralActionExpansion { expanded, moi_level, mutual })
}

/// Least-squares fit `y(t) ~ sum_k c_k t^{r_k}` with exponents fixed in advance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticFit {
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl AsymptoticFit {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn asymptotic_fit(t_grid: &[f64], values: &[f64], exponents: &[f64]) -> Result<AsymptoticFit> {
    let pf = power_fit(t_grid, values, exponents)?;
    Ok(AsymptoticFit {
        exponents: pf.exponents,
        coefficients: pf.coefficients,
        t_grid: t_grid.to_vec(),
        values: values.to_vec(),
        residuals: pf.residuals,
    })
}

/// Minimal `t * N^2` for which the neglected tail `sum_{n > N} exp(-t n^2)` is below `1e-13`.
pub const THETA_TAIL_PRODUCT: f64 = 30.0;

/// `sum_{n=1}^{N} exp(-t n^2)`, smallest terms first.
pub fn theta_sum(t: f64, nmax: usize) -> f64 {
    (1..=nmax).rev().map(|n| (-t * (n * n) as f64).exp()).sum()
}

/// Fits `c_- t^{-1/2} + c_0` to the theta sums on `t_grid`.
pub fn theta_asymptotic_check(nmax: usize, t_grid: &[f64]) -> Result<AsymptoticFit> {
    for &t in t_grid {
        check_t(t)?;
        let prod = t * (nmax * nmax) as f64;
        if prod < THETA_TAIL_PRODUCT {
            return Err(Error::TailTooFat { value: prod, required: THETA_TAIL_PRODUCT });
        }
    }
    let values: Vec<f64> = t_grid.par_iter().map(|&t| theta_sum(t, nmax)).collect();
    asymptotic_fit(t_grid, &values, &[-0.5, 0.0])
}

/// Partial Dirichlet sum with a bound on the neglected tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DirichletPartial {
    pub value: C64,
    /// `B N^{1-sigma} / (sigma - 1)` for coefficients bounded by `B` beyond `N`.
    pub tail_bound: f64,
    pub terms: u64,
}

const CHUNK: u64 = 8192;

/// `sum_{n=1}^{N} a_n n^{-s}` for `Re s > 1`. `coeff_bound` must bound `|a_n|` for `n > N`.
pub fn zeta_partial<F>(coeffs: F, coeff_bound: f64, s: C64, nmax: u64) -> Result<DirichletPartial>
where
    F: Fn(u64) -> f64 + Sync,
{
    let sigma = s.re;
    if !(sigma > 1.0) {
        return Err(Error::DivergentRegion { re_s: sigma });
    }
    let chunks = nmax.div_ceil(CHUNK);
    let sums: Vec<C64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK + 1;
            let hi = ((c + 1) * CHUNK).min(nmax);
            (lo..=hi)
                .rev()
                .map(|n| {
                    let a = coeffs(n);
                    if a == 0.0 {
                        ZERO
                    } else {
                        (-s * (n as f64).ln()).exp() * a
                    }
                })
                .sum()
        })
        .collect();
    let value = sums.iter().rev().sum();
    let tail_bound = coeff_bound * (nmax as f64).powf(1.0 - sigma) / (sigma - 1.0);
    Ok(DirichletPartial {
        value,
        tail_bound,
        terms: nmax,
    })
}

/// Fourth-order central difference of `s -> sum a_n n^{-s}` along the real direction.
pub fn zeta_partial_derivative<F>(coeffs: F, coeff_bound: f64, s: C64, nmax: u64, h: f64) -> Result<C64>
where
    F: Fn(u64) -> f64 + Sync,
{
    let at = |k: f64| zeta_partial(&coeffs, coeff_bound, s + C64::new(k * h, 0.0), nmax).map(|p| p.value);
    Ok((at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * 8.0) / (12.0 * h))
}

/// `1 / log n` for `n >= 2`, else `0`.
pub fn inverse_log_coeff(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        1.0 / (n as f64).ln()
    }
}

/// `Lambda(n) / log n`, i.e. `1/k` on `n = p^k` and `0` elsewhere.
pub fn mangoldt_over_log(n: u64) -> f64 {
    match prime_power(n) {
        Some((_, k)) => 1.0 / k as f64,
        None => 0.0,
    }
}

/// Largest argument accepted by [`von_mangoldt`].
pub const VON_MANGOLDT_LIMIT: u64 = 10_000_000;

/// `(p, k)` with `n = p^k`, `k >= 1`, by trial division.
fn prime_power(n: u64) -> Option<(u64, u32)> {
    if n < 2 {
        return None;
    }
    let mut p = 0;
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            p = d;
            break;
        }
        d += 1;
    }
    if p == 0 {
        return Some((n, 1));
    }
    let (mut m, mut k) = (n, 0);
    while m % p == 0 {
        m /= p;
        k += 1;
    }
    (m == 1).then_some((p, k))
}

/// `log p` if `n = p^k`, else `0`.
pub fn von_mangoldt(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("von Mangoldt function needs n >= 1".into()));
    }
    if n > VON_MANGOLDT_LIMIT {
        return Err(Error::RangeGuard { n, limit: VON_MANGOLDT_LIMIT });
    }
    Ok(prime_power(n).map_or(0.0, |(p, _)| (p as f64).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, random_hermitian, seeded_rng};
    use std::f64::consts::PI;

    fn diag_model(d: &[f64], v: &[f64]) -> SpectralTripleModel {
        SpectralTripleModel::new(
            HermitianOperator::from_real_diagonal(d),
            HermitianOperator::from_real_diagonal(v),
            identity(d.len()),
        )
        .unwrap()
    }

    #[test]
    fn direct_examples() {
        let m = diag_model(&[1.0, 2.0], &[0.0, 0.0]);
        let v = heat_trace_direct(&m, 1.0, HeatKind::Square).unwrap();
        assert!((v - 0.386195080060).abs() < 1e-11);
        let mut prev = v;
        for t in [2.0, 4.0, 8.0] {
            let next = heat_trace_direct(&m, t, HeatKind::Square).unwrap();
            assert!(next < prev);
            prev = next;
        }
        let big = SpectralTripleModel::diag_family(2000, 0.0).unwrap();
        let v = heat_trace_direct(&big, 0.01, HeatKind::Square).unwrap();
        assert!((v - 8.36226925453).abs() < 1e-9);
    }

    #[test]
    fn theta_weight_is_exact() {
        let m = diag_model(&[1.0, -2.0, 3.0], &[0.0; 3]);
        let got = m.theta().power(1.0);
        for (i, l) in [1.0f64, -2.0, 3.0].iter().enumerate() {
            assert_eq!(got[(i, i)].re, (1.0 + l * l).sqrt());
        }
    }

    #[test]
    fn unperturbed_expansions_are_exact() {
        let m = diag_model(&[1.0, 2.0, 3.5], &[0.0; 3]);
        let ts = [0.01, 0.03, 0.1, 0.3];
        for r in [heat_trace_expansion(&m, 3, &ts).unwrap(), abs_expansion(&m, 3, &ts).unwrap()] {
            assert!(r.remainders.iter().flatten().all(|x| *x < 1e-14));
        }
    }

    #[test]
    fn commuting_heat_matches_scalar_taylor() {
        let (d, v) = ([1.0, 2.0, 3.0], [0.3, -0.2, 0.1]);
        let m = diag_model(&d, &v);
        let r = heat_trace_expansion(&m, 6, &[0.1]).unwrap();
        let oracle: f64 = d
            .iter()
            .zip(&v)
            .map(|(d, v)| {
                let a = 2.0 * d * v + v * v;
                (-0.1 * d * d).exp() * (0..=6).map(|n| (-0.1 * a).powi(n) / factorial(n as usize)).sum::<f64>()
            })
            .sum();
        assert!((r.partial_sums[0][6] - oracle).abs() < 1e-12);
        assert!(r.remainders[0][6] < 1e-9);
    }

    #[test]
    fn abs_scalar_example() {
        let m = diag_model(&[1.0, 2.0], &[0.1, 0.0]);
        let r = abs_expansion(&m, 6, &[0.5]).unwrap();
        let oracle = (-0.5f64).exp() * (0..=6).map(|n| (-0.05f64).powi(n) / factorial(n as usize)).sum::<f64>()
            + (-1.0f64).exp();
        assert!((r.partial_sums[0][6] - oracle).abs() < 1e-12);
        let bad = diag_model(&[1.0, 2.0], &[-1.0, 0.0]);
        assert!(matches!(abs_expansion(&bad, 2, &[0.1]), Err(Error::SpectralGapViolation { .. })));
    }

    #[test]
    fn noncommuting_heat_remainders_shrink() {
        let mut rng = seeded_rng(5);
        let d = HermitianOperator::from_real_diagonal(&[1.0, 1.5, 2.5, 3.0, 4.0]);
        let v = HermitianOperator::new(random_hermitian(&mut rng, 5, 0.05)).unwrap();
        let m = SpectralTripleModel::new(d, v, identity(5)).unwrap();
        let r = heat_trace_expansion(&m, 4, &[0.05]).unwrap();
        assert!(r.remainders[0].windows(2).all(|w| w[1] < w[0]), "{:?}", r.remainders[0]);
        assert!(r.remainders[0][4] < 1e-8);
    }

    #[test]
    fn spectral_action_forms_agree() {
        let mut rng = seeded_rng(9);
        let d = HermitianOperator::new(diag_real(&[0.5, 1.0, 1.25, 1.5])).unwrap();
        let v = HermitianOperator::new(random_hermitian(&mut rng, 4, 0.05)).unwrap();
        let m = SpectralTripleModel::new(d, v, identity(4)).unwrap();
        let f = SymbolFunction::gauss(1.0);
        let r = spectral_action_expansion(&m, &f, 5, &[0.05, 0.1]).unwrap();
        for i in 0..2 {
            assert!(r.expanded.remainders[i][5] < 1e-10);
            assert!(r.moi_level.remainders[i][5] < 1e-10);
            assert!(r.mutual[i][5] < 1e-10);
        }
        let zero = diag_model(&[1.0, 2.0], &[0.0, 0.0]);
        let r = spectral_action_expansion(&zero, &f, 0, &[0.2]).unwrap();
        assert!(r.expanded.remainders[0][0] < 1e-15);
    }

    #[test]
    fn theta_constants() {
        let ts: Vec<f64> = (0..9).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect();
        let fit = theta_asymptotic_check(2000, &ts).unwrap();
        assert!((fit.coefficients[0] - PI.sqrt() / 2.0).abs() < 1e-8);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-8);
        assert!(matches!(theta_asymptotic_check(10, &[0.1]), Err(Error::TailTooFat { .. })));
    }

    #[test]
    fn zeta_examples() {
        let z = zeta_partial(|_| 1.0, 1.0, C64::new(2.0, 0.0), 100_000).unwrap();
        assert!((z.value.re - PI * PI / 6.0).abs() <= z.tail_bound);
        assert!(matches!(
            zeta_partial(|_| 1.0, 1.0, C64::new(1.0, 3.0), 10),
            Err(Error::DivergentRegion { .. })
        ));
        assert_eq!(von_mangoldt(1).unwrap(), 0.0);
        assert_eq!(von_mangoldt(8).unwrap(), 2f64.ln());
        assert_eq!(von_mangoldt(12).unwrap(), 0.0);
        assert_eq!(von_mangoldt(97).unwrap(), 97f64.ln());
        assert!(matches!(von_mangoldt(10_000_001), Err(Error::RangeGuard { .. })));
        assert_eq!(mangoldt_over_log(27), 1.0 / 3.0);
    }
}
