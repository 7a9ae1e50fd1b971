//! Truncated Taylor series ("jets") with complex coefficients.
//!
//! A jet of order `K` at `x0` stores `c[k] = g^{(k)}(x0) / k!` for `k <= K`.
//! Arithmetic on jets propagates exact derivatives through compositions, which
//! is how symbol functions and smooth cutoffs obtain derivatives of any order.

use std::ops::{Add, Mul, Neg, Sub};

use crate::linalg::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: Vec<C64>,
}

impl Jet {
    /// The identity function `x` expanded at `x0`.
    pub fn var(x0: f64, order: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); order + 1];
        c[0] = C64::new(x0, 0.0);
        if order >= 1 {
            c[1] = C64::new(1.0, 0.0);
        }
        Jet { c }
    }

    pub fn constant(v: C64, order: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); order + 1];
        c[0] = v;
        Jet { c }
    }

    pub fn from_coeffs(c: Vec<C64>) -> Self {
        assert!(!c.is_empty());
        Jet { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.c
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.c
    }

    pub fn value(&self) -> C64 {
        self.c[0]
    }

    /// `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> C64 {
        self.c[k] * factorial(k)
    }

    fn like(&self, v: C64) -> Jet {
        Jet::constant(v, self.order())
    }

    pub fn scale(&self, s: C64) -> Jet {
        Jet {
            c: self.c.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: C64) -> Jet {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    pub fn recip(&self) -> Jet {
        let a = &self.c;
        let inv0 = a[0].inv();
        let mut b = vec![C64::new(0.0, 0.0); a.len()];
        b[0] = inv0;
        for k in 1..a.len() {
            let s: C64 = (1..=k).map(|j| a[j] * b[k - j]).sum();
            b[k] = -s * inv0;
        }
        Jet { c: b }
    }

    pub fn div(&self, other: &Jet) -> Jet {
        self * &other.recip()
    }

    pub fn exp(&self) -> Jet {
        let a = &self.c;
        let mut b = vec![C64::new(0.0, 0.0); a.len()];
        b[0] = a[0].exp();
        for k in 1..a.len() {
            let s: C64 = (1..=k).map(|j| a[j] * b[k - j] * j as f64).sum();
            b[k] = s / k as f64;
        }
        Jet { c: b }
    }

    pub fn ln(&self) -> Jet {
        let a = &self.c;
        let mut b = vec![C64::new(0.0, 0.0); a.len()];
        b[0] = a[0].ln();
        for k in 1..a.len() {
            let s: C64 = (1..k).map(|j| b[j] * a[k - j] * j as f64).sum();
            b[k] = (a[k] - s / k as f64) / a[0];
        }
        Jet { c: b }
    }

    /// `self^alpha` for real `alpha` (principal branch).
    pub fn powf(&self, alpha: f64) -> Jet {
        let a = &self.c;
        let mut b = vec![C64::new(0.0, 0.0); a.len()];
        b[0] = a[0].powf(alpha);
        for k in 1..a.len() {
            let s: C64 = (1..=k)
                .map(|j| a[j] * b[k - j] * (alpha * j as f64 - (k - j) as f64))
                .sum();
            b[k] = s / (a[0] * k as f64);
        }
        Jet { c: b }
    }

    pub fn powi(&self, n: u32) -> Jet {
        let mut out = self.like(C64::new(1.0, 0.0));
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn sin(&self) -> Jet {
        let i = C64::new(0.0, 1.0);
        let p = self.scale(i).exp();
        let m = self.scale(-i).exp();
        (&p - &m).scale(C64::new(0.0, -0.5))
    }

    pub fn cos(&self) -> Jet {
        let i = C64::new(0.0, 1.0);
        let p = self.scale(i).exp();
        let m = self.scale(-i).exp();
        (&p + &m).scale(C64::new(0.5, 0.0))
    }

    /// Composition `g(self)` where `g` is given by its Taylor coefficients at `self.value()`.
    pub fn compose(&self, outer: &[C64]) -> Jet {
        let mut h = self.clone();
        h.c[0] = C64::new(0.0, 0.0);
        let mut out = self.like(C64::new(0.0, 0.0));
        for &g in outer.iter().rev() {
            out = &(&out * &h) + &self.like(g);
        }
        out
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        Jet {
            c: self.c.iter().zip(&o.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let n = self.c.len().min(o.c.len());
        let c = (0..n)
            .map(|k| (0..=k).map(|j| self.c[j] * o.c[k - j]).sum())
            .collect();
        Jet { c }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            c: self.c.iter().map(|a| -a).collect(),
        }
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: f64) -> bool {
        (a - C64::new(b, 0.0)).norm() <= 1e-12 * (1.0 + b.abs())
    }

    #[test]
    fn exp_derivatives() {
        let j = Jet::var(0.3, 6).exp();
        for k in 0..=6 {
            assert!(close(j.derivative(k), 0.3f64.exp()));
        }
    }

    #[test]
    fn recip_of_one_plus_square() {
        // (1+x^2)^{-1} at 0: 1 - x^2 + x^4 ...
        let x = Jet::var(0.0, 5);
        let g = (&(&x * &x)).add_scalar(C64::new(1.0, 0.0)).recip();
        let want = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0];
        for (k, w) in want.iter().enumerate() {
            assert!(close(g.coeffs()[k], *w));
        }
    }

    #[test]
    fn ln_and_powf_agree_with_closed_forms() {
        let x = Jet::var(2.0, 4);
        let l = x.ln();
        // d^k/dx^k log x = (-1)^{k-1}(k-1)! x^{-k}
        for k in 1..=4 {
            let want = (-1f64).powi(k as i32 - 1) * factorial(k - 1) * 2f64.powi(-(k as i32));
            assert!(close(l.derivative(k), want));
        }
        let p = x.powf(-0.5);
        let want1 = -0.5 * 2f64.powf(-1.5);
        assert!(close(p.derivative(1), want1));
    }

    #[test]
    fn sin_cos_identity() {
        let x = Jet::var(0.7, 5);
        let s = x.sin();
        let c = x.cos();
        let one = &(&s * &s) + &(&c * &c);
        assert!(close(one.coeffs()[0], 1.0));
        for k in 1..=5 {
            assert!(one.coeffs()[k].norm() < 1e-13);
        }
    }
}
