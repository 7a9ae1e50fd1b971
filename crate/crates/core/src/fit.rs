//! Least-squares fits: log-log slopes with confidence intervals, and linear fits in
//! a fixed power basis `sum_k c_k t^{r_k}`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Below this, remainders are treated as exact zeros rather than fitted.
pub const EXACT_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% interval on the slope (infinite with two points).
    pub slope_ci95: f64,
    pub points: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::DegenerateFit(format!("need >= 2 paired points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_ci95 = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        let se = (rss / (n - 2) as f64 / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 2) as f64)
            .map_err(|e| Error::DegenerateFit(e.to_string()))?
            .inverse_cdf(0.975);
        t * se
    } else {
        f64::INFINITY
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_ci95,
        points: n,
    })
}

/// Slope of `log y` against `log x`. Fails with `DegenerateFit` when any `y` is
/// below [`EXACT_FLOOR`] (the exactness regime).
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if let Some(v) = y.iter().find(|v| !(**v >= EXACT_FLOOR)) {
        return Err(Error::DegenerateFit(format!(
            "value {v:.3e} below {EXACT_FLOOR:.0e}: exact regime"
        )));
    }
    if x.iter().any(|v| *v <= 0.0) {
        return Err(Error::DegenerateFit("non-positive abscissa".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Linear least squares for `y(t) = sum_k c_k t^{r_k}` with fixed exponents.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl PowerFit {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn power_fit(t: &[f64], y: &[f64], exponents: &[f64]) -> Result<PowerFit> {
    let (n, k) = (t.len(), exponents.len());
    if n != y.len() || n < k || k == 0 {
        return Err(Error::DegenerateFit(format!("{n} points for {k} unknowns")));
    }
    let mut a = DMatrix::from_fn(n, k, |i, j| t[i].powf(exponents[j]));
    // column equilibration keeps the normal equations out of it
    let norms: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    for (j, s) in norms.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let c = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::DegenerateFit(e.to_string()))?;
    let fitted = &a * &c;
    let residuals = (0..n).map(|i| y[i] - fitted[i]).collect();
    Ok(PowerFit {
        exponents: exponents.to_vec(),
        coefficients: (0..k).map(|j| c[j] / norms[j]).collect(),
        residuals,
    })
}
