//! Scalar symbol functions with derivatives of every declared order.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg::{japanese, C64};

type JetFn = dyn Fn(&Jet) -> Jet + Send + Sync;
type DerivFn = dyn Fn(usize, f64) -> C64 + Send + Sync;

#[derive(Clone)]
enum Repr {
    /// Derivatives obtained by propagating a jet through the formula.
    Jet(Arc<JetFn>),
    /// Closed-form derivatives supplied by the caller.
    Closed(Arc<DerivFn>),
}

/// Open interval `(lo, hi)`; infinite bounds allowed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// A smooth scalar function `f` together with `f^{(k)}` for `k <= max_order`,
/// a declared symbol weight `beta` and an open domain.
#[derive(Clone)]
pub struct SymbolFunction {
    name: String,
    repr: Repr,
    max_order: usize,
    beta: f64,
    domain: Interval,
    support: Option<Interval>,
}

impl fmt::Debug for SymbolFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolFunction")
            .field("name", &self.name)
            .field("max_order", &self.max_order)
            .field("beta", &self.beta)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Default differentiation depth for jet-backed functions.
pub const JET_MAX_ORDER: usize = 64;

impl SymbolFunction {
    /// Function defined by a formula evaluated on jets; derivatives of any order
    /// up to `max_order` follow automatically.
    pub fn from_jet<F>(name: impl Into<String>, max_order: usize, f: F) -> Self
    where
        F: Fn(&Jet) -> Jet + Send + Sync + 'static,
    {
        SymbolFunction {
            name: name.into(),
            repr: Repr::Jet(Arc::new(f)),
            max_order,
            beta: 0.0,
            domain: Interval::REAL_LINE,
            support: None,
        }
    }

    /// Function given by user-supplied closed-form derivatives `(k, x) -> f^{(k)}(x)`.
    pub fn from_derivatives<F>(name: impl Into<String>, max_order: usize, f: F) -> Self
    where
        F: Fn(usize, f64) -> C64 + Send + Sync + 'static,
    {
        SymbolFunction {
            name: name.into(),
            repr: Repr::Closed(Arc::new(f)),
            max_order,
            beta: 0.0,
            domain: Interval::REAL_LINE,
            support: None,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_domain(mut self, domain: Interval) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// Compact support, when the function is known to vanish outside an interval.
    pub fn support(&self) -> Option<Interval> {
        self.support
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                name: self.name.clone(),
                point: x,
                lo: self.domain.lo,
                hi: self.domain.hi,
            })
        }
    }

    pub fn check_order(&self, k: usize) -> Result<()> {
        if k > self.max_order {
            Err(Error::OrderExceeded {
                name: self.name.clone(),
                requested: k,
                max_order: self.max_order,
            })
        } else {
            Ok(())
        }
    }

    pub fn value(&self, x: f64) -> C64 {
        match &self.repr {
            Repr::Jet(f) => f(&Jet::var(x, 0)).value(),
            Repr::Closed(d) => d(0, x),
        }
    }

    /// `f^{(k)}(x)`; panics only through the caller's formula, order is not checked here.
    pub fn derivative(&self, k: usize, x: f64) -> C64 {
        match &self.repr {
            Repr::Jet(f) => f(&Jet::var(x, k)).derivative(k),
            Repr::Closed(d) => d(k, x),
        }
    }

    /// Checked variant of [`derivative`](Self::derivative).
    pub fn try_derivative(&self, k: usize, x: f64) -> Result<C64> {
        self.check_order(k)?;
        self.check_domain(x)?;
        Ok(self.derivative(k, x))
    }

    /// Taylor coefficients `f^{(k)}(x)/k!` for `k <= order`.
    pub fn taylor(&self, x: f64, order: usize) -> Vec<C64> {
        match &self.repr {
            Repr::Jet(f) => f(&Jet::var(x, order)).into_coeffs(),
            Repr::Closed(d) => {
                let mut kf = 1.0;
                (0..=order)
                    .map(|k| {
                        if k > 0 {
                            kf *= k as f64;
                        }
                        d(k, x) / kf
                    })
                    .collect()
            }
        }
    }

    /// Propagate a jet through the function (used for compositions and cutoffs).
    pub fn eval_jet(&self, x: &Jet) -> Jet {
        match &self.repr {
            Repr::Jet(f) => f(x),
            Repr::Closed(_) => {
                let outer = self.taylor(x.value().re, x.order());
                x.compose(&outer)
            }
        }
    }

    /// The function `x -> f^{(k)}(x)` as a symbol of its own.
    pub fn derivative_function(&self, k: usize) -> Result<SymbolFunction> {
        self.check_order(k)?;
        let base = self.clone();
        let rest = self.max_order - k;
        let mut out = SymbolFunction::from_derivatives(
            format!("{}^({k})", self.name),
            rest,
            move |j, x| base.derivative(j + k, x),
        );
        out.domain = self.domain;
        out.beta = self.beta - k as f64;
        Ok(out)
    }

    /// Smoothness self-check: `f^{(k+1)}` matches central differences of `f^{(k)}`
    /// to `rel_tol` at five random interior points. Returns the worst relative error.
    pub fn self_check<R: Rng + ?Sized>(&self, rng: &mut R, rel_tol: f64) -> Result<f64> {
        let (lo, hi) = sample_window(self.domain);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let x = rng.random_range(lo..hi);
            let h = 1e-3 * (1.0 + x.abs());
            for k in 0..self.max_order.min(8) {
                // Richardson-extrapolated central difference
                let cd = |h: f64| (self.derivative(k, x + h) - self.derivative(k, x - h)) / (2.0 * h);
                let fd = (cd(h / 2.0) * 4.0 - cd(h)) / 3.0;
                let exact = self.derivative(k + 1, x);
                let scale = exact
                    .norm()
                    .max(self.derivative(k, x).norm())
                    .max(1e-300);
                worst = worst.max((fd - exact).norm() / scale);
            }
        }
        if worst > rel_tol {
            return Err(Error::InvalidInput(format!(
                "derivatives of `{}` fail the finite-difference check (rel err {worst:.3e})",
                self.name
            )));
        }
        Ok(worst)
    }

    // ---- built-in symbols ----

    pub fn identity() -> Self {
        SymbolFunction::from_jet("id", JET_MAX_ORDER, |x| x.clone()).with_beta(1.0)
    }

    pub fn constant(c: f64) -> Self {
        SymbolFunction::from_derivatives(format!("const({c})"), JET_MAX_ORDER, move |k, _| {
            if k == 0 {
                C64::new(c, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `exp(a x)`; closed-form derivatives `a^k exp(a x)`.
    pub fn exp_scaled(a: f64) -> Self {
        SymbolFunction::from_derivatives(format!("exp({a}x)"), JET_MAX_ORDER, move |k, x| {
            C64::new(a.powi(k as i32) * (a * x).exp(), 0.0)
        })
    }

    pub fn exp() -> Self {
        Self::exp_scaled(1.0)
    }

    /// `exp(-x)`, the heat-semigroup symbol.
    pub fn exp_neg() -> Self {
        Self::exp_scaled(-1.0)
    }

    /// `exp(-c x^2)`; Schwartz class, so any `beta` applies.
    pub fn gauss(c: f64) -> Self {
        SymbolFunction::from_jet(format!("gauss({c})"), JET_MAX_ORDER, move |x| {
            (&(x * x)).scale(C64::new(-c, 0.0)).exp()
        })
        .with_beta(-1.0)
    }

    /// Polynomial with coefficients in ascending degree.
    pub fn poly(coeffs: Vec<f64>) -> Self {
        let degree = coeffs.len().saturating_sub(1);
        SymbolFunction::from_derivatives(format!("poly{coeffs:?}"), 1 << 16, move |k, x| {
            // Horner on the k-th derivative's coefficients.
            let mut acc = 0.0;
            for (d, &c) in coeffs.iter().enumerate().skip(k).rev() {
                let falling: f64 = ((d - k + 1)..=d).map(|i| i as f64).product();
                acc = acc * x + c * falling;
            }
            C64::new(acc, 0.0)
        })
        .with_beta(degree as f64)
    }

    /// `(1 + x^2)^{-1/2}`.
    pub fn recip_sqrt() -> Self {
        SymbolFunction::from_jet("recip_sqrt", JET_MAX_ORDER, |x| {
            (&(x * x)).add_scalar(C64::new(1.0, 0.0)).powf(-0.5)
        })
        .with_beta(-1.0)
    }

    /// `(1 + x^2)^{-1}`.
    pub fn lorentz() -> Self {
        SymbolFunction::from_jet("lorentz", JET_MAX_ORDER, |x| {
            (&(x * x)).add_scalar(C64::new(1.0, 0.0)).recip()
        })
        .with_beta(-2.0)
    }

    pub fn sin() -> Self {
        SymbolFunction::from_jet("sin", JET_MAX_ORDER, |x| x.sin())
    }

    /// `x^alpha` on `(0, inf)`.
    pub fn power(alpha: f64) -> Self {
        SymbolFunction::from_jet(format!("x^{alpha}"), JET_MAX_ORDER, move |x| x.powf(alpha))
            .with_domain(Interval::new(0.0, f64::INFINITY))
            .with_beta(alpha)
    }

    /// Natural logarithm on `(0, inf)`.
    pub fn log() -> Self {
        SymbolFunction::from_jet("log", JET_MAX_ORDER, |x| x.ln())
            .with_domain(Interval::new(0.0, f64::INFINITY))
            .with_beta(1e-3)
    }

    /// `|x|` smoothed near the origin: exact outside `(-gap, gap)`.
    /// Used where only the values on a spectrum bounded away from zero matter.
    pub fn smoothed_abs(gap: f64) -> Self {
        SymbolFunction::from_jet(format!("abs~{gap}"), JET_MAX_ORDER, move |x| {
            let v = x.value().re;
            if v.abs() >= gap {
                if v >= 0.0 {
                    x.clone()
                } else {
                    -x
                }
            } else {
                // gap * sqrt(1 + (x/gap)^2) inside the gap: smooth, even, positive.
                let g = C64::new(gap, 0.0);
                let r = x.scale(g.inv());
                (&(&r * &r)).add_scalar(C64::new(1.0, 0.0)).sqrt().scale(g)
            }
        })
        .with_beta(1.0)
    }

    /// `f * chi` where `chi` is a smooth cutoff equal to 1 on `[lo, hi]` and
    /// vanishing outside `[lo - ramp, hi + ramp]`.
    pub fn windowed(&self, lo: f64, hi: f64, ramp: f64) -> Self {
        let base = self.clone();
        let mut out = SymbolFunction::from_jet(
            format!("{}*chi[{lo},{hi}]", self.name),
            self.max_order,
            move |x| {
                let chi = cutoff_jet(x, lo, hi, ramp);
                if chi.coeffs().iter().all(|c| *c == C64::new(0.0, 0.0)) {
                    return chi;
                }
                &base.eval_jet(x) * &chi
            },
        );
        out.domain = self.domain;
        out.beta = f64::NEG_INFINITY;
        out.support = Some(Interval::new(lo - ramp, hi + ramp));
        out
    }
}

/// `psi(u) = exp(-1/u)` for `u > 0`, else 0, on jets.
pub fn psi_jet(u: &Jet) -> Jet {
    if u.value().re <= 0.0 {
        Jet::constant(C64::new(0.0, 0.0), u.order())
    } else {
        (&-&u.recip()).exp()
    }
}

/// Smooth step: 0 for `u <= 0`, 1 for `u >= 1`, `psi(u)/(psi(u)+psi(1-u))` between.
pub fn smooth_step_jet(u: &Jet) -> Jet {
    let order = u.order();
    let v = u.value().re;
    if v <= 0.0 {
        return Jet::constant(C64::new(0.0, 0.0), order);
    }
    if v >= 1.0 {
        return Jet::constant(C64::new(1.0, 0.0), order);
    }
    let a = psi_jet(u);
    let one_minus = (&-u).add_scalar(C64::new(1.0, 0.0));
    let b = psi_jet(&one_minus);
    a.div(&(&a + &b))
}

/// Cutoff equal to 1 on `[lo, hi]`, 0 outside `[lo - ramp, hi + ramp]`.
pub fn cutoff_jet(x: &Jet, lo: f64, hi: f64, ramp: f64) -> Jet {
    let left = smooth_step_jet(&x.add_scalar(C64::new(-(lo - ramp), 0.0)).scale(C64::new(1.0 / ramp, 0.0)));
    let right = smooth_step_jet(
        &(&-x)
            .add_scalar(C64::new(hi + ramp, 0.0))
            .scale(C64::new(1.0 / ramp, 0.0)),
    );
    &left * &right
}

/// Finite window to sample from when checking smoothness.
fn sample_window(d: Interval) -> (f64, f64) {
    let lo = if d.lo.is_finite() { d.lo } else { -3.0 };
    let hi = if d.hi.is_finite() { d.hi } else { 3.0 };
    let (lo, hi) = if lo >= hi { (d.lo, d.hi) } else { (lo, hi) };
    let pad = 0.1 * (hi - lo);
    (lo + pad, hi - pad)
}

/// `|f(x)| <x>^{-beta}`, the pointwise weight used by the sup seminorms.
pub fn weighted_abs(f: &SymbolFunction, k: usize, x: f64, beta: f64) -> f64 {
    f.derivative(k, x).norm() * japanese(x).powf(k as f64 - beta)
}
