//! The scale of norms `||Theta^s x||` generated by a positive weight operator,
//! operator norms between levels, symbol seminorms and analytic-order probes.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::linalg::{check_square, diag_real, japanese, spectral_norm, CMat, CVec, C64};
use crate::quadrature::adaptive_simpson;
use crate::spectral::{HermitianOperator, SpectralDecomposition};
use crate::symbol::{Interval, SymbolFunction};

/// Positive definite weight `Theta`.
#[derive(Clone, Debug)]
pub struct WeightOperator {
    theta: HermitianOperator,
    min_eig: f64,
    /// Diagonal entries when `theta` is diagonal in the standard basis.
    diag: Option<Vec<f64>>,
}

impl WeightOperator {
    pub fn new(theta: HermitianOperator) -> Result<Self> {
        let e = theta.eig()?;
        let min_eig = e.eigenvalues[0];
        if !(min_eig > 0.0) {
            return Err(Error::SpectrumTooLow { min_eig, eps: 0.0 });
        }
        let m = theta.matrix();
        let diag = crate::linalg::is_diagonal(m).then(|| (0..m.nrows()).map(|i| m[(i, i)].re).collect());
        Ok(WeightOperator { theta, min_eig, diag })
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim]).expect("identity is positive")
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::from_real_diagonal(d))
    }

    pub fn theta(&self) -> &HermitianOperator {
        &self.theta
    }

    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    fn eig(&self) -> &SpectralDecomposition {
        self.theta.eig().expect("decomposition validated at construction")
    }

    /// `Theta^s`.
    pub fn power(&self, s: f64) -> CMat {
        if s == 0.0 {
            return CMat::identity(self.dim(), self.dim());
        }
        match &self.diag {
            Some(d) => diag_real(&d.iter().map(|x| x.powf(s)).collect::<Vec<_>>()),
            None => self.eig().apply(|x| C64::new(x.powf(s), 0.0)),
        }
    }

    /// `Theta^s A Theta^t`, by row and column scaling when `Theta` is diagonal.
    pub fn sandwich(&self, s: f64, a: &CMat, t: f64) -> CMat {
        match &self.diag {
            Some(d) => {
                let (l, r): (Vec<f64>, Vec<f64>) = d.iter().map(|x| (x.powf(s), x.powf(t))).unzip();
                CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (l[i] * r[j]))
            }
            None => self.power(s) * a * self.power(t),
        }
    }
}

pub fn sobolev_norm(x: &CVec, s: f64, w: &WeightOperator) -> Result<f64> {
    if x.len() != w.dim() {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: x.len(),
        });
    }
    Ok((w.power(s) * x).norm())
}

/// Pairing `<Theta^s u, Theta^{-s} v>` between levels `s` and `-s`.
pub fn scale_pairing(u: &CVec, v: &CVec, s: f64, w: &WeightOperator) -> C64 {
    (w.power(s) * u).dotc(&(w.power(-s) * v))
}

/// Norm of `A` as a map from level `s + r` to level `s`: `||Theta^s A Theta^{-(s+r)}||_2`.
pub fn op_norm(a: &CMat, s: f64, r: f64, w: &WeightOperator) -> Result<f64> {
    check_square(a, w.dim())?;
    Ok(spectral_norm(&w.sandwich(s, a, -(s + r))))
}

/// `max_lambda |f(lambda)| <lambda>^{-beta}` over the spectrum.
pub fn weighted_sup_norm(f: &SymbolFunction, e: &SpectralDecomposition, beta: f64) -> Result<f64> {
    let mut m: f64 = 0.0;
    for &l in &e.eigenvalues {
        f.check_domain(l)?;
        m = m.max(f.value(l).norm() * japanese(l).powf(-beta));
    }
    Ok(m)
}

/// Result of a numerical supremum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SupEstimate {
    pub value: f64,
    pub argmax: f64,
    /// Values grow monotonically towards an infinite end of the interval.
    pub unbounded: bool,
}

fn to_u(x: f64) -> f64 {
    x.atan()
}

/// Parametrization `u -> x` of the interval with `u` in a bounded range.
fn param(interval: Interval) -> (f64, f64, Box<dyn Fn(f64) -> (f64, f64) + Sync>) {
    // returns (u_lo, u_hi, u -> (x, dx/du))
    let ulo = if interval.lo.is_finite() { to_u(interval.lo) } else { -FRAC_PI_2 };
    let uhi = if interval.hi.is_finite() { to_u(interval.hi) } else { FRAC_PI_2 };
    (
        ulo,
        uhi,
        Box::new(|u: f64| {
            let c = u.cos();
            (u.tan(), 1.0 / (c * c))
        }),
    )
}

/// `sup_{x in I} |f^{(k)}(x)| <x>^{k - beta}` on a grid in `u = atan x`, refined by
/// doubling until the maximum is stable to `1e-4` relative.
pub fn s_beta_seminorm(f: &SymbolFunction, beta: f64, k: usize, interval: Interval) -> Result<SupEstimate> {
    f.check_order(k)?;
    let (ulo, uhi, map) = param(interval);
    let g = |u: f64| -> f64 {
        let (x, _) = map(u);
        if !x.is_finite() || !f.domain().contains(x) {
            return 0.0;
        }
        let v = f.derivative(k, x).norm() * japanese(x).powf(k as f64 - beta);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let sample = |m: usize| -> Vec<(f64, f64)> {
        (0..m)
            .map(|i| {
                let u = ulo + (uhi - ulo) * (i as f64 + 0.5) / m as f64;
                (u, g(u))
            })
            .collect()
    };
    let best = |pts: &[(f64, f64)]| {
        pts.iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, p)| if p.1 > acc.1 { (i, p.1) } else { acc })
    };
    let mut m = 256;
    let mut pts = sample(m);
    let (mut bi, mut bv) = best(&pts);
    for _ in 0..8 {
        m *= 2;
        let next = sample(m);
        let (ni, nv) = best(&next);
        let stable = (nv - bv).abs() <= 1e-4 * nv.abs().max(f64::MIN_POSITIVE);
        pts = next;
        bi = ni;
        bv = nv;
        if stable {
            break;
        }
    }
    // golden-section polish around the grid maximum
    let h = (uhi - ulo) / m as f64;
    let (mut a, mut b) = ((pts[bi].0 - h).max(ulo), (pts[bi].0 + h).min(uhi));
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - gr * (b - a);
        let d = a + gr * (b - a);
        if g(c) > g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let um = 0.5 * (a + b);
    let polished = g(um);
    let (value, argu) = if polished > bv { (polished, um) } else { (bv, pts[bi].0) };
    let last = pts.len() - 1;
    let monotone_to = |idx: &[usize]| idx.windows(2).all(|w| pts[w[1]].1 >= pts[w[0]].1);
    let tail: Vec<usize> = (last.saturating_sub(16)..=last).collect();
    let head: Vec<usize> = (0..=16.min(last)).rev().collect();
    let unbounded = (!interval.hi.is_finite() && bi == last && monotone_to(&tail) && pts[last].1 > pts[tail[0]].1)
        || (!interval.lo.is_finite() && bi == 0 && monotone_to(&head) && pts[0].1 > pts[head[0]].1)
        || !value.is_finite();
    Ok(SupEstimate {
        value,
        argmax: map(argu).0,
        unbounded,
    })
}

/// `int_I |f^{(k)}(x)| <x>^{k - beta - 1} dx` by adaptive Simpson in `u = atan x`.
pub fn t_beta_seminorm(f: &SymbolFunction, beta: f64, k: usize, interval: Interval) -> Result<f64> {
    f.check_order(k)?;
    let (ulo, uhi, map) = param(interval);
    let g = |u: f64| -> f64 {
        let (x, dx) = map(u);
        if !x.is_finite() || !dx.is_finite() || !f.domain().contains(x) {
            return 0.0;
        }
        let v = f.derivative(k, x).norm() * japanese(x).powf(k as f64 - beta - 1.0) * dx;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    Ok(adaptive_simpson(g, ulo, uhi, 1e-8, 1e-300, 50).value)
}

/// `delta_B^m(X)`, the `m`-fold commutator `[B, [B, ..., X]]`.
pub fn delta_power(b: &CMat, x: &CMat, m: usize) -> Result<CMat> {
    check_square(x, b.nrows())?;
    check_square(b, x.nrows())?;
    let mut out = x.clone();
    for _ in 0..m {
        out = b * &out - &out * b;
    }
    Ok(out)
}

/// `A^{flat_s} = Theta^{-2s-2r} A* Theta^{2s}`, the adjoint of `A: H^{s+r} -> H^s`
/// with respect to the inner products of both levels.
pub fn flat_adjoint(a: &CMat, s: f64, r: f64, w: &WeightOperator) -> Result<CMat> {
    check_square(a, w.dim())?;
    Ok(w.sandwich(-2.0 * s - 2.0 * r, &a.adjoint(), 2.0 * s))
}

/// Inner product of level `s`: `<Theta^s u, Theta^s v>`.
pub fn level_inner(u: &CVec, v: &CVec, s: f64, w: &WeightOperator) -> C64 {
    let p = w.power(s);
    (&p * u).dotc(&(&p * v))
}

type Builder = dyn Fn(usize) -> Result<(WeightOperator, CMat)> + Send + Sync;

/// A family of truncations `N -> (Theta_N, A_N)`.
#[derive(Clone)]
pub struct TruncationFamily {
    pub name: String,
    pub dims: Vec<usize>,
    pub nested: bool,
    builder: Arc<Builder>,
}

impl std::fmt::Debug for TruncationFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TruncationFamily")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("nested", &self.nested)
            .finish()
    }
}

impl TruncationFamily {
    pub fn new<F>(name: impl Into<String>, dims: Vec<usize>, nested: bool, builder: F) -> Self
    where
        F: Fn(usize) -> Result<(WeightOperator, CMat)> + Send + Sync + 'static,
    {
        TruncationFamily {
            name: name.into(),
            dims,
            nested,
            builder: Arc::new(builder),
        }
    }

    pub fn build(&self, dim: usize) -> Result<(WeightOperator, CMat)> {
        (self.builder)(dim)
    }

    /// `Theta = diag(1, ..., N)`, `A = Theta^power`.
    pub fn diag_linear(dims: Vec<usize>, power: f64) -> Self {
        Self::diag_power(dims, 1.0, power)
    }

    /// `Theta = diag(k^gamma)`, `A = diag(k^alpha)`; analytic order `alpha / gamma`.
    pub fn diag_power(dims: Vec<usize>, gamma: f64, alpha: f64) -> Self {
        Self::new(format!("diag_power(gamma={gamma},alpha={alpha})"), dims, true, move |n| {
            let k: Vec<f64> = (1..=n).map(|k| k as f64).collect();
            let theta: Vec<f64> = k.iter().map(|k| k.powf(gamma)).collect();
            let a: Vec<f64> = k.iter().map(|k| k.powf(alpha)).collect();
            Ok((WeightOperator::diagonal(&theta)?, diag_real(&a)))
        })
    }

    /// Oscillator basis: `Theta = diag(sqrt(2k+1))`, `A` the position operator
    /// (`op = "position"`, order 1) or the number operator (`op = "number"`, order 2).
    pub fn harmonic(dims: Vec<usize>, op: &str) -> Result<Self> {
        let number = match op {
            "position" => false,
            "number" => true,
            other => return Err(Error::InvalidInput(format!("unknown harmonic operator `{other}`"))),
        };
        Ok(Self::new(format!("harmonic({op})"), dims, true, move |n| {
            let theta: Vec<f64> = (0..n).map(|k| ((2 * k + 1) as f64).sqrt()).collect();
            let a = if number {
                diag_real(&(0..n).map(|k| k as f64).collect::<Vec<_>>())
            } else {
                let mut a = CMat::zeros(n, n);
                for k in 0..n.saturating_sub(1) {
                    let v = C64::new(((k + 1) as f64 / 2.0).sqrt(), 0.0);
                    a[(k, k + 1)] = v;
                    a[(k + 1, k)] = v;
                }
                a
            };
            Ok((WeightOperator::diagonal(&theta)?, a))
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderReport {
    /// Smallest `r` with growth slope at most the threshold, if any.
    pub order: Option<f64>,
    pub threshold: f64,
    pub dims: Vec<usize>,
    /// `(r, fitted log-log slope of the norms against N)`.
    pub slopes: Vec<(f64, f64)>,
    pub s_probe: f64,
}

pub const ORDER_SLOPE_THRESHOLD: f64 = 0.05;

/// Smallest `r` in `r_grid` for which `N -> op_norm(A_N, s, r, Theta_N)` stays bounded,
/// operationally: fitted log-log slope `<= 0.05`.
pub fn estimate_analytic_order(family: &TruncationFamily, r_grid: &[f64], s_probe: f64) -> Result<OrderReport> {
    if family.dims.len() < 4 {
        return Err(Error::InsufficientDims {
            needed: 4,
            got: family.dims.len(),
        });
    }
    if family.dims.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("dims must be strictly ascending".into()));
    }
    let built: Vec<(WeightOperator, CMat)> = family
        .dims
        .par_iter()
        .map(|&n| family.build(n))
        .collect::<Result<_>>()?;
    let dims: Vec<f64> = family.dims.iter().map(|&n| n as f64).collect();
    let mut grid = r_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let slopes: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&r| {
            let norms: Vec<f64> = built
                .iter()
                .map(|(w, a)| op_norm(a, s_probe, r, w))
                .collect::<Result<_>>()?;
            let slope = if norms.iter().all(|v| *v > 0.0) {
                loglog_fit(&dims, &norms).map(|f| f.slope).unwrap_or(0.0)
            } else {
                0.0
            };
            Ok((r, slope))
        })
        .collect::<Result<_>>()?;
    let order = slopes
        .iter()
        .find(|(_, s)| *s <= ORDER_SLOPE_THRESHOLD)
        .map(|(r, _)| *r);
    Ok(OrderReport {
        order,
        threshold: ORDER_SLOPE_THRESHOLD,
        dims: family.dims.clone(),
        slopes,
        s_probe,
    })
}

/// Uniform grid `lo, lo + step, ..., <= hi`.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, identity, random_matrix, random_vector, seeded_rng};

    #[test]
    fn sobolev_norm_examples() {
        let mut rng = seeded_rng(1);
        let x = random_vector(&mut rng, 4);
        let n = sobolev_norm(&x, 2.5, &WeightOperator::identity(4)).unwrap();
        assert!((n - x.norm()).abs() < 1e-14);
        let w = WeightOperator::diagonal(&[1.0, 2.0]).unwrap();
        let e2 = CVec::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        assert!((sobolev_norm(&e2, 3.0, &w).unwrap() - 8.0).abs() < 1e-13);
        let w = WeightOperator::diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let x = random_vector(&mut rng, 5);
        let want = (0..5).map(|i| (x[i] / (i + 1) as f64).norm_sqr()).sum::<f64>().sqrt();
        assert!((sobolev_norm(&x, -1.0, &w).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn op_norm_examples() {
        let w = WeightOperator::diagonal(&[1.0, 2.0, 4.0]).unwrap();
        let theta = w.theta().matrix().clone();
        assert!((op_norm(&theta, 0.7, 1.0, &w).unwrap() - 1.0).abs() < 1e-12);
        assert!((op_norm(&identity(3), -1.3, 0.0, &w).unwrap() - 1.0).abs() < 1e-12);
        let ones = from_real(3, 3, &[1.0; 9]);
        assert!((op_norm(&ones, 0.0, 0.0, &w).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_sup_examples() {
        let e = crate::spectral::eig_with_tol(&diag_real(&[0.0, 3.0]), 1e-12).unwrap();
        let v = weighted_sup_norm(&SymbolFunction::identity(), &e, 1.0).unwrap();
        assert!((v - 3.0 / 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(weighted_sup_norm(&SymbolFunction::constant(1.0), &e, 0.0).unwrap(), 1.0);
        let e = crate::spectral::eig_with_tol(&diag_real(&[0.0, 1.0]), 1e-12).unwrap();
        assert_eq!(weighted_sup_norm(&SymbolFunction::gauss(1.0), &e, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn s_beta_examples() {
        let r = Interval::REAL_LINE;
        let v = s_beta_seminorm(&SymbolFunction::lorentz(), -2.0, 0, r).unwrap();
        assert!((v.value - 1.0).abs() < 1e-4 && !v.unbounded);
        let v = s_beta_seminorm(&SymbolFunction::constant(1.0), 0.0, 0, r).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
        let v = s_beta_seminorm(&SymbolFunction::identity(), 1.0, 1, r).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
        let v = s_beta_seminorm(&SymbolFunction::poly(vec![0.0, 0.0, 1.0]), 0.0, 0, r).unwrap();
        assert!(v.unbounded);
    }

    #[test]
    fn t_beta_examples() {
        let r = Interval::REAL_LINE;
        let v = t_beta_seminorm(&SymbolFunction::gauss(1.0), 0.0, 0, r).unwrap();
        assert!((v - 1.524_109_385_773_909).abs() < 1e-6 * v);
        assert_eq!(t_beta_seminorm(&SymbolFunction::constant(0.0), 0.0, 0, r).unwrap(), 0.0);
        let v = t_beta_seminorm(&SymbolFunction::lorentz(), -1.0, 0, r).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-6 * v);
    }

    #[test]
    fn delta_power_examples() {
        let b = diag_real(&[1.0, 2.0]);
        let x = from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(delta_power(&b, &x, 0).unwrap(), x);
        let d = diag_real(&[3.0, -1.0]);
        assert_eq!(delta_power(&b, &d, 1).unwrap(), CMat::zeros(2, 2));
        let d2 = delta_power(&b, &x, 2).unwrap();
        assert_eq!(d2, x);
        assert_eq!(delta_power(&b, &x, 1).unwrap(), -x);
    }

    #[test]
    fn flat_adjoint_examples() {
        let mut rng = seeded_rng(4);
        let a = random_matrix(&mut rng, 3, 1.0);
        let w = WeightOperator::diagonal(&[1.0, 2.5, 4.0]).unwrap();
        assert!((flat_adjoint(&a, 0.0, 0.0, &w).unwrap() - a.adjoint()).norm() < 1e-14);
        let i3 = WeightOperator::identity(3);
        assert!((flat_adjoint(&a, 1.2, -0.4, &i3).unwrap() - a.adjoint()).norm() < 1e-14);
        let w = WeightOperator::diagonal(&[1.0, 2.0]).unwrap();
        let x = from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let f = flat_adjoint(&x, 1.0, 0.0, &w).unwrap();
        assert!((f - from_real(2, 2, &[0.0, 0.0, 0.25, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn order_estimates() {
        let dims = vec![50, 100, 200, 400];
        let grid = uniform_grid(-2.0, 4.0, 0.02);
        for (p, want) in [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)] {
            let fam = TruncationFamily::diag_linear(dims.clone(), p);
            let rep = estimate_analytic_order(&fam, &grid, 0.0).unwrap();
            assert!((rep.order.unwrap() - want).abs() <= 0.05, "{p}: {:?}", rep.order);
        }
        let fam = TruncationFamily::diag_linear(vec![1, 2, 3], 1.0);
        assert!(matches!(
            estimate_analytic_order(&fam, &grid, 0.0),
            Err(Error::InsufficientDims { .. })
        ));
    }
}
