//! Expansion coefficients, Taylor and commutator expansions of multiple operator
//! integrals, and remainder-order fits.

use num_integer::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LinearFit, EXACT_FLOOR};
use crate::linalg::{check_square, spectral_norm, CMat, C64};
use crate::moi::{moi_dd, moi_dd_same};
use crate::sobolev::delta_power;
use crate::spectral::{apply_function, HermitianOperator};
use crate::symbol::SymbolFunction;

/// Largest number of expansion terms accepted before refusing to expand.
pub const TERM_GUARD: u128 = 1_000_000;

/// `binom(n, k)` in exact checked arithmetic.
pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) / (i + 1) stays integral at every step
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = c.gcd(&den);
        let (c1, d1) = (c / g, den / g);
        let n1 = num / d1;
        c = c1
            .checked_mul(n1)
            .ok_or_else(|| Error::Overflow(format!("binom({n}, {k})")))?;
    }
    Ok(c)
}

/// Multiset coefficient `binom(n + k - 1, k)`, with `((0, 0)) = 1` and `((0, k)) = 0` for `k > 0`.
pub fn multiset_coeff(n: u64, k: u64) -> Result<u128> {
    if n == 0 {
        return Ok(u128::from(k == 0));
    }
    binomial(n + k - 1, k)
}

/// `(m_1, ..., m_n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct MultiIndex {
    pub parts: Vec<usize>,
}

impl MultiIndex {
    pub fn new(parts: Vec<usize>) -> Self {
        MultiIndex { parts }
    }

    pub fn n(&self) -> usize {
        self.parts.len()
    }

    pub fn m(&self) -> usize {
        self.parts.iter().sum()
    }
}

/// `C_{m_1..m_n} = prod_j binom(j + m_1 + ... + m_j - 1, m_j)` exactly.
pub fn expansion_coeff(mi: &MultiIndex) -> Result<u128> {
    let mut c: u128 = 1;
    let mut acc = 0u64;
    for (j, &mj) in mi.parts.iter().enumerate() {
        acc += mj as u64;
        let b = binomial(j as u64 + acc, mj as u64)?;
        c = c
            .checked_mul(b)
            .ok_or_else(|| Error::Overflow(format!("C{:?}", mi.parts)))?;
    }
    Ok(c)
}

pub fn factorial_u128(k: u64) -> Result<u128> {
    (1..=k as u128).try_fold(1u128, |a, i| a.checked_mul(i))
        .ok_or_else(|| Error::Overflow(format!("{k}!")))
}

/// `C / (n + m)!` reduced to lowest terms, as `(numerator, denominator)`.
pub fn expansion_ratio(mi: &MultiIndex) -> Result<(u128, u128)> {
    let c = expansion_coeff(mi)?;
    let f = factorial_u128((mi.n() + mi.m()) as u64)?;
    let g = c.gcd(&f);
    Ok((c / g, f / g))
}

/// `C / (n + m)!` as a float, rounded once from the reduced fraction.
pub fn expansion_weight(mi: &MultiIndex) -> Result<f64> {
    let (p, q) = expansion_ratio(mi)?;
    Ok(p as f64 / q as f64)
}

/// Compositions of `m` into `n` nonnegative parts in colex order
/// (the last part is the most significant).
pub fn compositions(m: usize, n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return if m == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for last in 0..=m {
        for mut head in compositions(m - last, n - 1) {
            head.push(last);
            out.push(head);
        }
    }
    out
}

/// Partial sums of an expansion and their distance to the exact value.
#[derive(Clone, Debug)]
pub struct ExpansionResult {
    /// `partial_sums[k]` includes all terms of order `<= k`.
    pub partial_sums: Vec<CMat>,
    /// `batches[k] = partial_sums[k] - partial_sums[k-1]`, computed independently.
    pub batches: Vec<CMat>,
    pub term_counts: Vec<usize>,
    pub remainder_norms: Vec<f64>,
    pub exact: CMat,
}

impl ExpansionResult {
    fn from_batches(batches: Vec<CMat>, term_counts: Vec<usize>, exact: CMat) -> Self {
        let mut partial_sums: Vec<CMat> = Vec::with_capacity(batches.len());
        for b in &batches {
            let next = match partial_sums.last() {
                Some(p) => p + b,
                None => b.clone(),
            };
            partial_sums.push(next);
        }
        let remainder_norms = partial_sums.iter().map(|p| spectral_norm(&(&exact - p))).collect();
        ExpansionResult {
            partial_sums,
            batches,
            term_counts,
            remainder_norms,
            exact,
        }
    }

    /// Size of the quantities being compared, for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.partial_sums
            .iter()
            .map(spectral_norm)
            .fold(spectral_norm(&self.exact), f64::max)
            .max(f64::MIN_POSITIVE)
    }

    pub fn partial_norms(&self) -> Vec<f64> {
        self.partial_sums.iter().map(spectral_norm).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TaylorExpansion {
    pub result: ExpansionResult,
    /// `|| f(H+V) - partial_k - T^{H+V,H..H}_{f^{[k+1]}}(V..V) ||_2` for each `k`.
    pub remainder_identity_residuals: Vec<f64>,
}

/// `f(H + V) = sum_{n <= N} T_{f^{[n]}}^{H..H}(V..V) + T_{f^{[N+1]}}^{H+V,H..H}(V..V)`.
pub fn taylor_expand(f: &SymbolFunction, h: &HermitianOperator, v: &HermitianOperator, order: usize) -> Result<TaylorExpansion> {
    f.check_order(order + 3)?;
    check_square(v.matrix(), h.dim())?;
    let hv = HermitianOperator::new(h.matrix() + v.matrix())?;
    let exact = apply_function(f, &hv)?;
    let vm = v.matrix();
    let mut batches = Vec::with_capacity(order + 1);
    for n in 0..=order {
        let args = vec![vm; n];
        batches.push(moi_dd_same(f, h, &args)?);
    }
    let result = ExpansionResult::from_batches(batches, vec![1; order + 1], exact);
    let mut residuals = Vec::with_capacity(order + 1);
    for k in 0..=order {
        let mut hs = vec![h; k + 2];
        hs[0] = &hv;
        let args = vec![vm; k + 1];
        let rem = moi_dd(f, &hs, &args)?;
        residuals.push(spectral_norm(&(&result.exact - &result.partial_sums[k] - rem)));
    }
    Ok(TaylorExpansion {
        result,
        remainder_identity_residuals: residuals,
    })
}

fn check_guard(n: usize, order: usize) -> Result<u128> {
    let mut total: u128 = 0;
    for m in 0..=order {
        total = total.saturating_add(multiset_coeff(n as u64, m as u64)?);
    }
    if total > TERM_GUARD {
        return Err(Error::BlowupGuard { terms: total, limit: TERM_GUARD });
    }
    Ok(total)
}

/// `delta_H^k(X_j)` for `k <= order`.
fn delta_table(h: &CMat, xs: &[&CMat], order: usize) -> Result<Vec<Vec<CMat>>> {
    xs.iter()
        .map(|x| {
            let mut row = vec![(*x).clone()];
            for k in 1..=order {
                row.push(delta_power(h, &row[k - 1], 1)?);
            }
            Ok(row)
        })
        .collect()
}

/// `sum_{m <= N} sum_{|m| = m} C/(n+m)! delta^{m_1}(X_1) .. delta^{m_n}(X_n) f^{(n+m)}(H)`
/// against the exact `T_{f^{[n]}}^{H..H}(X_1..X_n)`.
pub fn combinatorial_expand(f: &SymbolFunction, h: &HermitianOperator, xs: &[&CMat], order: usize) -> Result<ExpansionResult> {
    let n = xs.len();
    f.check_order(n + order)?;
    check_guard(n, order)?;
    for x in xs {
        check_square(x, h.dim())?;
    }
    let exact = moi_dd_same(f, h, xs)?;
    let deltas = delta_table(h.matrix(), xs, order)?;
    let dim = h.dim();
    let e = h.eig()?;
    let mut batches = Vec::with_capacity(order + 1);
    let mut counts = Vec::with_capacity(order + 1);
    for m in 0..=order {
        let k = n + m;
        for &l in &e.eigenvalues {
            f.check_domain(l)?;
        }
        let fk = e.apply(|x| f.derivative(k, x));
        let comps = compositions(m, n);
        let mut batch = CMat::zeros(dim, dim);
        for parts in &comps {
            let w = expansion_weight(&MultiIndex::new(parts.clone()))?;
            let mut prod = CMat::identity(dim, dim);
            for (j, &mj) in parts.iter().enumerate() {
                prod *= &deltas[j][mj];
            }
            batch += prod * C64::new(w, 0.0);
        }
        batches.push(batch * fk);
        counts.push(comps.len());
    }
    Ok(ExpansionResult::from_batches(batches, counts, exact))
}

/// `T^H_{f^{[k]}}` with the given argument list, where `None` stands for the identity.
fn moi_slots(f: &SymbolFunction, h: &HermitianOperator, slots: &[Option<&CMat>], one: &CMat) -> Result<CMat> {
    let args: Vec<&CMat> = slots.iter().map(|s| s.unwrap_or(one)).collect();
    moi_dd_same(f, h, &args)
}

/// `R^n_{j,N}(X_1..X_n) = sum_{l<=j} ((N+1, l)) T_{f^{[n+j+N+1]}}(1^{j-l}, delta^{N+1}(X_1), 1^{N+1+l}, X_2..X_n)`.
pub fn commute1_remainder(f: &SymbolFunction, h: &HermitianOperator, xs: &[&CMat], j: usize, order: usize) -> Result<CMat> {
    let dim = h.dim();
    let one = CMat::identity(dim, dim);
    let d = delta_power(h.matrix(), xs[0], order + 1)?;
    let mut out = CMat::zeros(dim, dim);
    for l in 0..=j {
        let c = multiset_coeff(order as u64 + 1, l as u64)? as f64;
        let mut slots: Vec<Option<&CMat>> = vec![None; j - l];
        slots.push(Some(&d));
        slots.extend(std::iter::repeat_n(None, order + 1 + l));
        slots.extend(xs[1..].iter().map(|x| Some(*x)));
        out += moi_slots(f, h, &slots, &one)? * C64::new(c, 0.0);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Commute1Report {
    pub residual: f64,
    pub scale: f64,
    pub relative: f64,
}

/// Checks
/// `T_{f^{[n+j]}}(1^j, X_1..X_n) = sum_{m<=N} ((m+1, j)) delta^m(X_1) T_{f^{[n+j+m]}}(1^{j+1+m}, X_2..X_n) + R^n_{j,N}`.
pub fn commute1_residual(f: &SymbolFunction, h: &HermitianOperator, xs: &[&CMat], j: usize, order: usize) -> Result<Commute1Report> {
    let n = xs.len();
    if n == 0 {
        return Err(Error::InvalidInput("need at least one argument X_1".into()));
    }
    f.check_order(n + j + order + 1)?;
    let dim = h.dim();
    let one = CMat::identity(dim, dim);
    let mut slots: Vec<Option<&CMat>> = vec![None; j];
    slots.extend(xs.iter().map(|x| Some(*x)));
    let lhs = moi_slots(f, h, &slots, &one)?;
    let deltas = delta_table(h.matrix(), &xs[..1], order)?;
    let mut rhs = CMat::zeros(dim, dim);
    let mut scale = spectral_norm(&lhs);
    for (m, dm) in deltas[0].iter().enumerate() {
        let c = multiset_coeff(m as u64 + 1, j as u64)? as f64;
        let mut s: Vec<Option<&CMat>> = vec![None; j + 1 + m];
        s.extend(xs[1..].iter().map(|x| Some(*x)));
        let term = dm * moi_slots(f, h, &s, &one)? * C64::new(c, 0.0);
        scale = scale.max(spectral_norm(&term));
        rhs += term;
    }
    let rem = commute1_remainder(f, h, xs, j, order)?;
    scale = scale.max(spectral_norm(&rem));
    let residual = spectral_norm(&(lhs - rhs - rem));
    Ok(Commute1Report {
        residual,
        scale,
        relative: residual / scale.max(f64::MIN_POSITIVE),
    })
}

/// Remainder `S^n_N` assembled from the `R`-terms:
/// `sum_{k<n} sum_{m_1+..+m_k <= N} prod_{i<=k} ((m_i+1, i-1+m_1+..+m_{i-1}))
///  delta^{m_1}(X_1)..delta^{m_k}(X_k) R^{n-k}_{k+m_1+..+m_k, N-m_1-..-m_k}(X_{k+1}..X_n)`.
pub fn combinatorial_remainder(f: &SymbolFunction, h: &HermitianOperator, xs: &[&CMat], order: usize) -> Result<CMat> {
    let n = xs.len();
    f.check_order(n + order + 1)?;
    let dim = h.dim();
    let deltas = delta_table(h.matrix(), xs, order)?;
    let mut out = CMat::zeros(dim, dim);
    for k in 0..n {
        for used in 0..=order {
            for parts in compositions(used, k) {
                let mut coeff: u128 = 1;
                let mut acc = 0usize;
                let mut prod = CMat::identity(dim, dim);
                for (i, &mi) in parts.iter().enumerate() {
                    coeff = coeff
                        .checked_mul(multiset_coeff(mi as u64 + 1, (i + acc) as u64)?)
                        .ok_or_else(|| Error::Overflow("remainder coefficient".into()))?;
                    acc += mi;
                    prod *= &deltas[i][mi];
                }
                let r = commute1_remainder(f, h, &xs[k..], k + used, order - used)?;
                out += prod * r * C64::new(coeff as f64, 0.0);
            }
        }
    }
    Ok(out)
}

/// What `[f(Theta), X]` is expanded for.
#[derive(Clone, Debug)]
pub enum CommutatorSymbol {
    Function(SymbolFunction),
    /// `Theta^alpha`, coefficients `binom(alpha, k) Theta^{alpha - k}`.
    Power(f64),
    /// `log Theta`, coefficients `(-1)^{k-1}/k Theta^{-k}`.
    Log,
}

/// Threshold below which `Theta` is considered too close to singular for powers and logs.
pub const POSITIVITY_EPS: f64 = 1e-8;

/// `[f(Theta), X] ~ sum_{k=1}^{N} (1/k!) delta_Theta^k(X) f^{(k)}(Theta)`; `partial_sums[0] = 0`.
pub fn commutator_expand(sym: &CommutatorSymbol, theta: &HermitianOperator, x: &CMat, order: usize) -> Result<ExpansionResult> {
    check_square(x, theta.dim())?;
    let e = theta.eig()?;
    let dim = theta.dim();
    let coeff = |k: usize, l: f64| -> C64 {
        match sym {
            CommutatorSymbol::Function(f) => f.derivative(k, l) / crate::jet::factorial(k),
            CommutatorSymbol::Power(a) => {
                let mut b = 1.0;
                for i in 0..k {
                    b *= (a - i as f64) / (i + 1) as f64;
                }
                C64::new(b * l.powf(a - k as f64), 0.0)
            }
            CommutatorSymbol::Log => {
                let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                C64::new(s / k as f64 * l.powi(-(k as i32)), 0.0)
            }
        }
    };
    let fvalue = |l: f64| -> C64 {
        match sym {
            CommutatorSymbol::Function(f) => f.value(l),
            CommutatorSymbol::Power(a) => C64::new(l.powf(*a), 0.0),
            CommutatorSymbol::Log => C64::new(l.ln(), 0.0),
        }
    };
    match sym {
        CommutatorSymbol::Function(f) => {
            f.check_order(order)?;
            for &l in &e.eigenvalues {
                f.check_domain(l)?;
            }
        }
        _ => {
            if e.eigenvalues[0] <= POSITIVITY_EPS {
                return Err(Error::SpectrumTooLow { min_eig: e.eigenvalues[0], eps: POSITIVITY_EPS });
            }
        }
    }
    let ft = e.apply(fvalue);
    let exact = &ft * x - x * &ft;
    let deltas = delta_table(theta.matrix(), &[x], order)?;
    let mut batches = vec![CMat::zeros(dim, dim)];
    for k in 1..=order {
        let fk = e.apply(|l| coeff(k, l));
        batches.push(&deltas[0][k] * fk);
    }
    let counts = (0..=order).map(|k| usize::from(k > 0)).collect();
    Ok(ExpansionResult::from_batches(batches, counts, exact))
}

/// Fitted remainder exponent for one truncation order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderFit {
    pub order: usize,
    /// `None` in the exactness regime (remainders below `1e-13`).
    pub fit: Option<LinearFit>,
    pub exact: bool,
}

/// Log-log slope of the remainder against the scale parameter, per truncation order.
/// `results[i]` is the expansion evaluated at `scales[i]`.
pub fn remainder_order_fit(results: &[ExpansionResult], scales: &[f64]) -> Result<Vec<OrderFit>> {
    if results.len() != scales.len() {
        return Err(Error::DimensionMismatch { expected: scales.len(), found: results.len() });
    }
    let remainders: Vec<Vec<f64>> = results.iter().map(|r| r.remainder_norms.clone()).collect();
    fit_remainders(&remainders, scales)
}

/// Same as [`remainder_order_fit`] on raw remainders indexed `[scale][order]`.
pub fn fit_remainders(remainders: &[Vec<f64>], scales: &[f64]) -> Result<Vec<OrderFit>> {
    if scales.len() < 4 {
        return Err(Error::DegenerateFit(format!("need >= 4 scale points, got {}", scales.len())));
    }
    let (lo, hi) = scales
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), s| (a.min(*s), b.max(*s)));
    if !(lo > 0.0) || (hi / lo).log10() < 1.5 - 1e-6 {
        return Err(Error::DegenerateFit("scale grid must span at least 1.5 decades".into()));
    }
    let orders = remainders.iter().map(Vec::len).min().unwrap_or(0);
    (0..orders)
        .map(|k| {
            let ys: Vec<f64> = remainders.iter().map(|r| r[k]).collect();
            if ys.iter().all(|y| *y < EXACT_FLOOR) {
                return Ok(OrderFit { order: k, fit: None, exact: true });
            }
            let fit = loglog_fit(scales, &ys).ok();
            Ok(OrderFit { order: k, fit, exact: false })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, random_hermitian, random_matrix, seeded_rng};

    #[test]
    fn multiset_examples() {
        assert_eq!(multiset_coeff(7, 0).unwrap(), 1);
        assert_eq!(multiset_coeff(0, 0).unwrap(), 1);
        assert_eq!(multiset_coeff(3, 2).unwrap(), 6);
        let s: u128 = (0..=2).map(|l| multiset_coeff(2, l).unwrap()).sum();
        assert_eq!(s, multiset_coeff(3, 2).unwrap());
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(expansion_coeff(&MultiIndex::new(vec![0, 0, 0])).unwrap(), 1);
        for m in 0..15 {
            assert_eq!(expansion_coeff(&MultiIndex::new(vec![m])).unwrap(), 1);
        }
        assert_eq!(expansion_coeff(&MultiIndex::new(vec![1, 1])).unwrap(), 3);
        assert_eq!(expansion_ratio(&MultiIndex::new(vec![1, 1])).unwrap(), (1, 8));
    }

    #[test]
    fn compositions_are_colex() {
        assert_eq!(compositions(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(compositions(3, 3).len(), 10);
        assert_eq!(compositions(1, 0).len(), 0);
    }

    #[test]
    fn square_first_order_expansion_is_exact() {
        let mut rng = seeded_rng(31);
        let h = HermitianOperator::new(random_hermitian(&mut rng, 5, 1.0)).unwrap();
        let x = random_matrix(&mut rng, 5, 1.0);
        let f = SymbolFunction::poly(vec![0.0, 0.0, 1.0]);
        let r = combinatorial_expand(&f, &h, &[&x], 1).unwrap();
        assert!(r.remainder_norms[1] < 1e-12);
        let want = &x * h.matrix() + h.matrix() * &x;
        assert!((&r.partial_sums[1] - want).norm() < 1e-12);
    }

    #[test]
    fn commuting_arguments_keep_only_leading_batch() {
        let h = HermitianOperator::new(diag_real(&[0.2, 0.9, -0.4])).unwrap();
        let x1 = diag_real(&[1.0, -2.0, 0.5]);
        let x2 = diag_real(&[0.3, 0.1, 2.0]);
        let r = combinatorial_expand(&SymbolFunction::exp(), &h, &[&x1, &x2], 3).unwrap();
        for b in &r.batches[1..] {
            assert_eq!(b.norm(), 0.0);
        }
        assert!(r.remainder_norms[0] < 1e-14);
    }

    #[test]
    fn exp_remainders_decrease_and_replay() {
        let mut rng = seeded_rng(37);
        let h = HermitianOperator::new(random_hermitian(&mut rng, 6, 0.5)).unwrap();
        let x1 = random_matrix(&mut rng, 6, 0.5);
        let x2 = random_matrix(&mut rng, 6, 0.5);
        let f = SymbolFunction::exp();
        let r = combinatorial_expand(&f, &h, &[&x1, &x2], 3).unwrap();
        assert!(r.remainder_norms.windows(2).all(|w| w[1] < w[0]));
        for n in 0..=3 {
            let s = combinatorial_remainder(&f, &h, &[&x1, &x2], n).unwrap();
            let resid = (&r.exact - &r.partial_sums[n] - s).norm();
            assert!(resid < 1e-9 * r.scale(), "N={n}: {resid}");
        }
    }

    #[test]
    fn commute1_examples() {
        let mut rng = seeded_rng(41);
        let h = HermitianOperator::new(random_hermitian(&mut rng, 5, 1.0)).unwrap();
        let x1 = random_matrix(&mut rng, 5, 1.0);
        let x2 = random_matrix(&mut rng, 5, 1.0);
        let f = SymbolFunction::exp();
        assert!(commute1_residual(&f, &h, &[&x1], 0, 0).unwrap().residual < 1e-12);
        let c = crate::spectral::apply_function(&SymbolFunction::sin(), &h).unwrap();
        assert!(commute1_residual(&f, &h, &[&c], 1, 2).unwrap().residual < 1e-12);
        assert!(commute1_residual(&f, &h, &[&x1, &x2], 2, 3).unwrap().relative < 1e-9);
    }

    #[test]
    fn taylor_examples() {
        let mut rng = seeded_rng(43);
        let h = HermitianOperator::new(random_hermitian(&mut rng, 5, 1.0)).unwrap();
        let zero = HermitianOperator::new(CMat::zeros(5, 5)).unwrap();
        let t = taylor_expand(&SymbolFunction::exp(), &h, &zero, 3).unwrap();
        assert!(t.result.remainder_norms.iter().all(|r| *r < 1e-13));
        let v = HermitianOperator::new(random_hermitian(&mut rng, 5, 1.0)).unwrap();
        let cubic = SymbolFunction::poly(vec![0.5, 1.0, -1.0, 0.3]);
        let t = taylor_expand(&cubic, &h, &v, 3).unwrap();
        assert!(t.result.remainder_norms[3] < 1e-10 * t.result.scale());
        let t = taylor_expand(&SymbolFunction::exp(), &h, &v, 2).unwrap();
        assert!(t.remainder_identity_residuals.iter().all(|r| *r < 1e-9 * t.result.scale()));
    }

    #[test]
    fn commutator_power_examples() {
        let mut rng = seeded_rng(47);
        let m = random_hermitian(&mut rng, 4, 0.3) + CMat::identity(4, 4) * C64::new(2.0, 0.0);
        let theta = HermitianOperator::new(m).unwrap();
        let x = random_matrix(&mut rng, 4, 1.0);
        let r = commutator_expand(&CommutatorSymbol::Power(1.0), &theta, &x, 3).unwrap();
        assert!(r.remainder_norms[1] < 1e-12);
        let r = commutator_expand(&CommutatorSymbol::Power(2.0), &theta, &x, 3).unwrap();
        assert!(r.remainder_norms[2] < 1e-12);
        let c = crate::spectral::apply_function(&SymbolFunction::exp(), &theta).unwrap();
        let r = commutator_expand(&CommutatorSymbol::Log, &theta, &c, 4).unwrap();
        assert!(r.remainder_norms.iter().all(|v| *v < 1e-12));
        let bad = HermitianOperator::new(diag_real(&[0.0, 1.0])).unwrap();
        assert!(matches!(
            commutator_expand(&CommutatorSymbol::Log, &bad, &CMat::zeros(2, 2), 2),
            Err(Error::SpectrumTooLow { .. })
        ));
    }

    #[test]
    fn guard_rejects_huge_expansions() {
        let h = HermitianOperator::new(diag_real(&[1.0, 2.0])).unwrap();
        let x = CMat::identity(2, 2);
        let xs: Vec<&CMat> = vec![&x; 12];
        let f = SymbolFunction::exp();
        assert!(matches!(
            combinatorial_expand(&f, &h, &xs, 30),
            Err(Error::BlowupGuard { .. })
        ));
    }
}
