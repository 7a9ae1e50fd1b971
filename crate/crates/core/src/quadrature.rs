//! One-dimensional quadrature rules.

use std::f64::consts::PI;

/// Value and error estimate of an adaptive rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Adaptive Simpson on `[a, b]` to relative tolerance `rel_tol` (absolute floor `abs_tol`).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_depth: usize,
) -> QuadResult {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // coarse global magnitude from a composite pass, to set the absolute target
    let probe: f64 = (0..=16)
        .map(|i| f(a + (b - a) * i as f64 / 16.0).abs())
        .sum::<f64>()
        * (b - a).abs()
        / 17.0;
    let tol = (rel_tol * probe).max(abs_tol);
    let mut evals = 3 + 17;
    let mut value = 0.0;
    let mut error = 0.0;
    // (a, b, fa, fm, fb, whole, tol, depth)
    let mut stack = vec![(a, b, fa, fm, fb, whole, tol, 0usize)];
    while let Some((a, b, fa, fm, fb, whole, tol, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        evals += 2;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth >= max_depth || diff.abs() <= 15.0 * tol {
            value += left + right + diff / 15.0;
            error += diff.abs() / 15.0;
        } else {
            stack.push((m, b, fm, frm, fb, right, 0.5 * tol, depth + 1));
            stack.push((a, m, fa, flm, fm, left, 0.5 * tol, depth + 1));
        }
    }
    QuadResult {
        value,
        error,
        evaluations: evals,
    }
}
