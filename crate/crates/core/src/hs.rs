//! Almost analytic extensions and the Helffer–Sjöstrand formula
//! `f(A) = -(1/pi) int dbar(f~)(z) (z - A)^{-1} dx dy`, its divided-difference form
//! `f^{[n]}(l_0..l_n) = -(1/pi) int dbar(f~)(z) prod_j (z - l_j)^{-1} dx dy`,
//! and scans of weighted resolvent norms.
//!
//! Integrals run over the strip `|y| <= 2<x>` in coordinates `(x, u)` with
//! `y = u <x>`, where the bump depends on `u` alone.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{japanese, CMat, C64, ZERO};
use crate::quadrature::gauss_legendre;
use crate::sobolev::{op_norm, WeightOperator};
use crate::spectral::HermitianOperator;
use crate::symbol::SymbolFunction;

fn psi(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Admissible bumps: 1 on `|s| <= 1`, 0 on `|s| >= 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bump {
    /// `psi(2-|s|) / (psi(2-|s|) + psi(|s|-1))` with `psi(u) = exp(-1/u)`.
    #[default]
    Psi,
    /// Same quotient with `psi(u)^2`.
    PsiSquared,
}

impl Bump {
    fn p(self, u: f64) -> f64 {
        match self {
            Bump::Psi => psi(u),
            Bump::PsiSquared => psi(u).powi(2),
        }
    }

    /// `d/du p(u)`.
    fn dp(self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match self {
            Bump::Psi => psi(u) / (u * u),
            Bump::PsiSquared => 2.0 * psi(u).powi(2) / (u * u),
        }
    }

    pub fn value(self, s: f64) -> f64 {
        let r = s.abs();
        let (a, b) = (self.p(2.0 - r), self.p(r - 1.0));
        if r <= 1.0 {
            1.0
        } else if r >= 2.0 {
            0.0
        } else {
            a / (a + b)
        }
    }

    pub fn derivative(self, s: f64) -> f64 {
        let r = s.abs();
        if r <= 1.0 || r >= 2.0 {
            return 0.0;
        }
        let (a, b) = (self.p(2.0 - r), self.p(r - 1.0));
        let (da, db) = (-self.dp(2.0 - r), self.dp(r - 1.0));
        s.signum() * (da * b - a * db) / ((a + b) * (a + b))
    }
}

/// `psi(2-|s|) / (psi(2-|s|) + psi(|s|-1))`.
pub fn bump_tau(s: f64) -> f64 {
    Bump::Psi.value(s)
}

/// `f~(x + iy) = tau(y/<x>) sum_{k <= N} f^{(k)}(x) (iy)^k / k!`.
#[derive(Clone, Debug)]
pub struct AlmostAnalyticExtension {
    f: SymbolFunction,
    n: usize,
    bump: Bump,
}

impl AlmostAnalyticExtension {
    pub fn new(f: &SymbolFunction, n: usize, bump: Bump) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("extension order N must be at least 1".into()));
        }
        f.check_order(n + 1)?;
        Ok(AlmostAnalyticExtension { f: f.clone(), n, bump })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn bump(&self) -> Bump {
        self.bump
    }

    pub fn function(&self) -> &SymbolFunction {
        &self.f
    }

    pub fn value(&self, z: C64) -> C64 {
        let (x, y) = (z.re, z.im);
        let sigma = self.bump.value(y / japanese(x));
        if sigma == 0.0 {
            return ZERO;
        }
        let c = self.f.taylor(x, self.n);
        horner(&c, C64::new(0.0, y)) * sigma
    }

    /// `d f~ / d zbar` from the Taylor coefficients `c_k = f^{(k)}(x)/k!`, `k <= N+1`.
    fn dbar_from_taylor(&self, c: &[C64], x: f64, y: f64) -> C64 {
        let jx = japanese(x);
        let u = y / jx;
        let sigma = self.bump.value(u);
        let dt = self.bump.derivative(u);
        if sigma == 0.0 && dt == 0.0 {
            return ZERO;
        }
        let iy = C64::new(0.0, y);
        let n = self.n;
        let mut out = ZERO;
        if dt != 0.0 {
            let sx = dt * (-u * x / (jx * jx));
            let sy = dt / jx;
            out += horner(&c[..=n], iy) * C64::new(sx, sy) * 0.5;
        }
        // f^{(N+1)} (iy)^N / N! = (N+1) c_{N+1} (iy)^N
        out + c[n + 1] * (n + 1) as f64 * iy.powu(n as u32) * (0.5 * sigma)
    }

    pub fn dbar(&self, z: C64) -> C64 {
        let c = self.f.taylor(z.re, self.n + 1);
        self.dbar_from_taylor(&c, z.re, z.im)
    }
}

fn horner(c: &[C64], w: C64) -> C64 {
    c.iter().rev().fold(ZERO, |acc, a| acc * w + a)
}

/// `dbar` of an extension at `z`.
pub fn dbar(ext: &AlmostAnalyticExtension, z: C64) -> C64 {
    ext.dbar(z)
}

/// Adaptive tensor Gauss–Legendre quadrature over the strip.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Integration range in `x`; the support of `f` when absent.
    pub x_range: Option<(f64, f64)>,
    /// Range of `u = y/<x>`; the bump vanishes beyond `|u| = 2`.
    pub u_range: (f64, f64),
    /// Gauss–Legendre points per direction and cell.
    pub points: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_cells: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            x_range: None,
            u_range: (-2.0, 2.0),
            points: 8,
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_cells: 200_000,
        }
    }
}

/// One accepted panel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PanelDiagnostic {
    pub x_center: f64,
    pub u_center: f64,
    pub x_size: f64,
    pub u_size: f64,
    pub estimate: f64,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureReport {
    pub error_estimate: f64,
    pub evaluations: usize,
    pub panels: Vec<PanelDiagnostic>,
}

struct Cell {
    x: (f64, f64),
    u: (f64, f64),
    value: Vec<C64>,
    error: f64,
    depth: usize,
    id: usize,
}

impl PartialEq for Cell {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cell {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error).then(o.id.cmp(&self.id))
    }
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Integrand on `(x, u)` given the Taylor data of `f` at `x`; returns `len` values.
trait StripIntegrand: Sync {
    fn len(&self) -> usize;
    /// Adds `w * g(x, u)` to `out`.
    fn accumulate(&self, taylor: &[C64], x: f64, u: f64, w: f64, out: &mut [C64]) -> Result<()>;
}

struct Rules {
    hi: (Vec<f64>, Vec<f64>),
    lo: (Vec<f64>, Vec<f64>),
}

fn eval_cell<G: StripIntegrand>(
    g: &G,
    ext: &AlmostAnalyticExtension,
    rules: &Rules,
    x: (f64, f64),
    u: (f64, f64),
) -> Result<(Vec<C64>, f64, usize)> {
    let rule = |r: &(Vec<f64>, Vec<f64>)| -> Result<(Vec<C64>, usize)> {
        let mut out = vec![ZERO; g.len()];
        let (hx, cx) = (0.5 * (x.1 - x.0), 0.5 * (x.1 + x.0));
        let (hu, cu) = (0.5 * (u.1 - u.0), 0.5 * (u.1 + u.0));
        for (xi, wi) in r.0.iter().zip(&r.1) {
            let xv = cx + hx * xi;
            let taylor = ext.f.taylor(xv, ext.n + 1);
            for (uj, wj) in r.0.iter().zip(&r.1) {
                g.accumulate(&taylor, xv, cu + hu * uj, wi * wj * hx * hu, &mut out)?;
            }
        }
        Ok((out, r.0.len() * r.0.len()))
    };
    let (v, e1) = rule(&rules.hi)?;
    let (w, e2) = rule(&rules.lo)?;
    let err = vnorm(&v.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok((v, err, e1 + e2))
}

fn breakpoints(lo: f64, hi: f64, inner: &[f64]) -> Vec<f64> {
    let mut b = vec![lo, hi];
    b.extend(inner.iter().copied().filter(|v| *v > lo && *v < hi));
    b.sort_by(f64::total_cmp);
    b.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    b
}

/// `int int g(x, u) dx du` adaptively; the integrand is expected to carry the
/// `-(1/pi) <x>` factor itself.
fn integrate_strip<G: StripIntegrand>(
    g: &G,
    ext: &AlmostAnalyticExtension,
    spec: &QuadratureSpec,
    x_range: (f64, f64),
    x_breaks: &[f64],
) -> Result<(Vec<C64>, QuadratureReport)> {
    if spec.points < 4 {
        return Err(Error::InvalidInput("quadrature needs at least 4 points per direction".into()));
    }
    let rules = Rules {
        hi: gauss_legendre(spec.points),
        lo: gauss_legendre(spec.points - 2),
    };
    let xb = breakpoints(x_range.0, x_range.1, x_breaks);
    let ub = breakpoints(spec.u_range.0, spec.u_range.1, &[-1.0, 0.0, 1.0]);
    let mut seeds = Vec::new();
    for xw in xb.windows(2) {
        for uw in ub.windows(2) {
            seeds.push(((xw[0], xw[1]), (uw[0], uw[1])));
        }
    }
    let mut id = 0;
    let mut evaluations = 0;
    let mut heap = BinaryHeap::new();
    let first: Vec<(Vec<C64>, f64, usize)> = seeds
        .par_iter()
        .map(|(x, u)| eval_cell(g, ext, &rules, *x, *u))
        .collect::<Result<_>>()?;
    for ((x, u), (value, error, ev)) in seeds.into_iter().zip(first) {
        evaluations += ev;
        heap.push(Cell { x, u, value, error, depth: 0, id });
        id += 1;
    }
    // running totals; the final value is re-summed in panel order
    let mut total_err: f64 = heap.iter().map(|c| c.error).sum();
    let mut total = vec![ZERO; g.len()];
    for c in heap.iter() {
        for (t, v) in total.iter_mut().zip(&c.value) {
            *t += v;
        }
    }
    loop {
        if total_err <= (spec.rel_tol * vnorm(&total)).max(spec.abs_tol) {
            break;
        }
        if heap.len() + 3 > spec.max_cells {
            return Err(Error::QuadratureStall { estimate: total_err, cells: heap.len() });
        }
        let worst = heap.pop().expect("nonempty heap");
        total_err -= worst.error;
        for (t, v) in total.iter_mut().zip(&worst.value) {
            *t -= v;
        }
        let (xm, um) = (0.5 * (worst.x.0 + worst.x.1), 0.5 * (worst.u.0 + worst.u.1));
        let kids = [
            ((worst.x.0, xm), (worst.u.0, um)),
            ((xm, worst.x.1), (worst.u.0, um)),
            ((worst.x.0, xm), (um, worst.u.1)),
            ((xm, worst.x.1), (um, worst.u.1)),
        ];
        let vals: Vec<(Vec<C64>, f64, usize)> = kids
            .par_iter()
            .map(|(x, u)| eval_cell(g, ext, &rules, *x, *u))
            .collect::<Result<_>>()?;
        for ((x, u), (value, error, ev)) in kids.into_iter().zip(vals) {
            evaluations += ev;
            total_err += error;
            for (t, v) in total.iter_mut().zip(&value) {
                *t += v;
            }
            heap.push(Cell { x, u, value, error, depth: worst.depth + 1, id });
            id += 1;
        }
    }
    // panel-ordered summation
    let mut cells = heap.into_vec();
    cells.sort_by(|a, b| a.x.0.total_cmp(&b.x.0).then(a.u.0.total_cmp(&b.u.0)));
    let mut total = vec![ZERO; g.len()];
    for c in &cells {
        for (t, v) in total.iter_mut().zip(&c.value) {
            *t += v;
        }
    }
    let report = QuadratureReport {
        error_estimate: cells.iter().map(|c| c.error).sum(),
        evaluations,
        panels: cells
            .iter()
            .map(|c| PanelDiagnostic {
                x_center: 0.5 * (c.x.0 + c.x.1),
                u_center: 0.5 * (c.u.0 + c.u.1),
                x_size: c.x.1 - c.x.0,
                u_size: c.u.1 - c.u.0,
                estimate: c.error,
                depth: c.depth,
            })
            .collect(),
    };
    Ok((total, report))
}

/// Nodes closer than this to a spectral point count as hitting the spectrum.
pub const RESOLVENT_FLOOR: f64 = 1e-12;

/// `-(1/pi) <x> dbar(x + i u<x>) prod_j (z - l_j)^{-1}` for each product set.
struct ScalarProducts<'a> {
    ext: &'a AlmostAnalyticExtension,
    /// One entry per output component: the points `l_j` of the product.
    sets: Vec<Vec<f64>>,
}

impl StripIntegrand for ScalarProducts<'_> {
    fn len(&self) -> usize {
        self.sets.len()
    }

    fn accumulate(&self, taylor: &[C64], x: f64, u: f64, w: f64, out: &mut [C64]) -> Result<()> {
        let jx = japanese(x);
        let y = u * jx;
        let d = self.ext.dbar_from_taylor(taylor, x, y);
        if d == ZERO {
            return Ok(());
        }
        let z = C64::new(x, y);
        let scale = d * (-jx * w / std::f64::consts::PI);
        for (o, set) in out.iter_mut().zip(&self.sets) {
            let mut p = scale;
            for &l in set {
                let r = z - l;
                if r.norm() < RESOLVENT_FLOOR {
                    return Err(Error::SingularResolvent { re: x, im: y });
                }
                p /= r;
            }
            *o += p;
        }
        Ok(())
    }
}

/// Resolvent by LU for matrices without a Hermitian decomposition.
struct MatrixResolvent<'a> {
    ext: &'a AlmostAnalyticExtension,
    a: &'a CMat,
}

impl StripIntegrand for MatrixResolvent<'_> {
    fn len(&self) -> usize {
        self.a.len()
    }

    fn accumulate(&self, taylor: &[C64], x: f64, u: f64, w: f64, out: &mut [C64]) -> Result<()> {
        let jx = japanese(x);
        let y = u * jx;
        let d = self.ext.dbar_from_taylor(taylor, x, y);
        if d == ZERO {
            return Ok(());
        }
        let z = C64::new(x, y);
        let n = self.a.nrows();
        let r = (CMat::identity(n, n) * z - self.a)
            .try_inverse()
            .ok_or(Error::SingularResolvent { re: x, im: y })?;
        let scale = d * (-jx * w / std::f64::consts::PI);
        for (o, v) in out.iter_mut().zip(r.iter()) {
            *o += v * scale;
        }
        Ok(())
    }
}

/// `f` itself when compactly supported, else `f` times a cutoff equal to 1 on
/// `[lo - 1, hi + 1]` and vanishing outside `[lo - 2, hi + 2]`.
fn compact(f: &SymbolFunction, lo: f64, hi: f64) -> SymbolFunction {
    match f.support() {
        Some(s) if s.is_bounded() => f.clone(),
        _ => f.windowed(lo - 1.0, hi + 1.0, 1.0),
    }
}

fn x_range(f: &SymbolFunction, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    if let Some(r) = spec.x_range {
        return Ok(r);
    }
    match f.support() {
        Some(s) if s.is_bounded() => Ok((s.lo, s.hi)),
        _ => Err(Error::InvalidInput(format!("`{}` has no bounded support", f.name()))),
    }
}

/// `f(A)` by the Helffer–Sjöstrand integral.
pub fn hs_apply(f: &SymbolFunction, a: &CMat, n: usize, bump: Bump, spec: &QuadratureSpec) -> Result<(CMat, QuadratureReport)> {
    let dim = a.nrows();
    crate::linalg::check_square(a, dim)?;
    match HermitianOperator::new(a.clone()) {
        Ok(h) => {
            let e = h.eig()?;
            let lam = e.column_values();
            let g = compact(f, lam[0], lam[dim - 1]);
            let ext = AlmostAnalyticExtension::new(&g, n, bump)?;
            let integrand = ScalarProducts {
                ext: &ext,
                sets: e.eigenvalues.iter().map(|l| vec![*l]).collect(),
            };
            let (vals, report) = integrate_strip(&integrand, &ext, spec, x_range(&g, spec)?, &e.eigenvalues)?;
            let cl = e.cluster_of();
            let out = e.apply_indexed(|j| vals[cl[j]]);
            Ok((out, report))
        }
        Err(Error::NotHermitian { .. }) => {
            let ext = AlmostAnalyticExtension::new(f, n, bump)?;
            let integrand = MatrixResolvent { ext: &ext, a };
            let (vals, report) = integrate_strip(&integrand, &ext, spec, x_range(f, spec)?, &[])?;
            Ok((CMat::from_column_slice(dim, dim, &vals), report))
        }
        Err(e) => Err(e),
    }
}

/// Default extension order for an `n`-th divided difference.
pub fn default_order(n: usize) -> usize {
    n + 2
}

/// `f^{[n]}(l_0..l_n)` by the contour formula.
pub fn hs_divided_difference(
    f: &SymbolFunction,
    nodes: &[f64],
    n_ext: usize,
    bump: Bump,
    spec: &QuadratureSpec,
) -> Result<(C64, QuadratureReport)> {
    if nodes.is_empty() {
        return Err(Error::InvalidInput("need at least one node".into()));
    }
    let (lo, hi) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let g = compact(f, lo, hi);
    let ext = AlmostAnalyticExtension::new(&g, n_ext, bump)?;
    let integrand = ScalarProducts { ext: &ext, sets: vec![nodes.to_vec()] };
    let (vals, report) = integrate_strip(&integrand, &ext, spec, x_range(&g, spec)?, nodes)?;
    Ok((vals[0], report))
}

/// Weighted resolvent norms against `|Im z|^{-1} (<z>/|Im z|)^{2^{|s|} - 1}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventScan {
    pub s: f64,
    pub ratios: Vec<f64>,
    pub fitted_c: f64,
    /// Grid indices with non-finite ratios.
    pub violations: Vec<usize>,
}

pub fn resolvent_bound_scan(a: &CMat, w: &WeightOperator, s: f64, z_grid: &[C64]) -> Result<ResolventScan> {
    let dim = w.dim();
    crate::linalg::check_square(a, dim)?;
    if let Some(z) = z_grid.iter().find(|z| z.im == 0.0) {
        return Err(Error::SingularZ(z.re));
    }
    let expo = 2f64.powf(s.abs()) - 1.0;
    let ratios: Vec<f64> = z_grid
        .par_iter()
        .map(|z| {
            let r = (CMat::identity(dim, dim) * *z - a)
                .try_inverse()
                .ok_or(Error::SingularResolvent { re: z.re, im: z.im })?;
            let norm = op_norm(&r, s, 0.0, w)?;
            let jz = (1.0 + z.norm_sqr()).sqrt();
            let bound = (jz / z.im.abs()).powf(expo) / z.im.abs();
            Ok(norm / bound)
        })
        .collect::<Result<_>>()?;
    let violations = (0..ratios.len()).filter(|&i| !ratios[i].is_finite()).collect();
    let fitted_c = ratios.iter().copied().filter(|r| r.is_finite()).fold(0.0, f64::max);
    Ok(ResolventScan { s, ratios, fitted_c, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divdiff::{divided_difference, DEFAULT_CONFLUENCE_TOL};
    use crate::linalg::{diag_real, random_hermitian, seeded_rng, spectral_norm};
    use crate::spectral::apply_function;

    #[test]
    fn bump_examples() {
        assert_eq!(bump_tau(0.5), 1.0);
        assert_eq!(bump_tau(3.0), 0.0);
        assert!((bump_tau(1.5) - 0.5).abs() < 1e-15);
        assert!((bump_tau(-1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 0..=100 {
            let v = bump_tau(1.0 + k as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
        for b in [Bump::Psi, Bump::PsiSquared] {
            for s in [1.2, 1.5, 1.9, -1.3] {
                let h = 1e-6;
                let fd = (b.value(s + h) - b.value(s - h)) / (2.0 * h);
                assert!((fd - b.derivative(s)).abs() < 1e-6, "{b:?} {s}");
            }
        }
    }

    #[test]
    fn dbar_support_plateau_and_finite_differences() {
        let f = SymbolFunction::identity().windowed(-1.0, 1.0, 1.0);
        let ext = AlmostAnalyticExtension::new(&f, 1, Bump::Psi).unwrap();
        assert_eq!(ext.dbar(C64::new(0.3, 2.5)), ZERO);
        for z in [C64::new(0.3, 0.5), C64::new(-0.4, 1.6), C64::new(1.5, 1.8), C64::new(0.2, -1.3)] {
            let h = 1e-5;
            let dx = (ext.value(z + h) - ext.value(z - h)) / (2.0 * h);
            let dy = (ext.value(z + C64::new(0.0, h)) - ext.value(z - C64::new(0.0, h))) / (2.0 * h);
            let fd = (dx + C64::new(0.0, 1.0) * dy) * 0.5;
            assert!((fd - ext.dbar(z)).norm() < 1e-6, "{z}: {fd} vs {}", ext.dbar(z));
        }
        // plateau: only the order N+1 term
        let g = SymbolFunction::exp();
        let ext = AlmostAnalyticExtension::new(&g, 2, Bump::Psi).unwrap();
        let z = C64::new(0.4, 0.3);
        let want = C64::new(0.0, 0.3).powu(2) * 0.4f64.exp() * 0.5 / 2.0;
        assert!((ext.dbar(z) - want).norm() < 1e-14);
        assert_eq!(ext.value(C64::new(0.7, 0.0)), C64::new(0.7f64.exp(), 0.0));
    }

    #[test]
    fn hs_matches_spectral_calculus() {
        let mut rng = seeded_rng(3);
        let a = random_hermitian(&mut rng, 5, 1.0);
        let f = SymbolFunction::gauss(1.0);
        let spec = QuadratureSpec::default();
        let (m, _) = hs_apply(&f, &a, 3, Bump::Psi, &spec).unwrap();
        let want = apply_function(&f, &HermitianOperator::new(a.clone()).unwrap()).unwrap();
        assert!(spectral_norm(&(&m - &want)) < 1e-6, "{}", spectral_norm(&(&m - &want)));
        let (z, _) = hs_apply(&SymbolFunction::constant(0.0).windowed(-1.0, 1.0, 1.0), &a, 2, Bump::Psi, &spec).unwrap();
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn hs_divided_differences() {
        let spec = QuadratureSpec::default();
        let sq = SymbolFunction::poly(vec![0.0, 0.0, 1.0]);
        let (v, _) = hs_divided_difference(&sq, &[1.0, 3.0], 3, Bump::Psi, &spec).unwrap();
        assert!((v - C64::new(4.0, 0.0)).norm() < 1e-6, "{v}");
        let (v, _) = hs_divided_difference(&SymbolFunction::sin(), &[0.7], 2, Bump::Psi, &spec).unwrap();
        assert!((v.re - 0.7f64.sin()).abs() < 1e-7);
        let (v, _) = hs_divided_difference(&SymbolFunction::exp(), &[0.3, 0.3], 3, Bump::Psi, &spec).unwrap();
        assert!((v.re - 0.3f64.exp()).abs() < 1e-6);
        let nodes = [-0.5, 0.2, 1.1, 1.4];
        let want = divided_difference(&SymbolFunction::sin(), &nodes, DEFAULT_CONFLUENCE_TOL).unwrap();
        let (v, _) = hs_divided_difference(&SymbolFunction::sin(), &nodes, 5, Bump::PsiSquared, &spec).unwrap();
        assert!((v - want).norm() < 1e-6, "{v} {want}");
    }

    #[test]
    fn resolvent_scan_examples() {
        let a = diag_real(&[-1.0, 0.5, 2.0]);
        let w = WeightOperator::identity(3);
        let grid: Vec<C64> = [1.0, 0.1, 0.01].iter().map(|e| C64::new(0.5, *e)).collect();
        let r = resolvent_bound_scan(&a, &w, 0.0, &grid).unwrap();
        assert!((r.fitted_c - 1.0).abs() < 1e-12);
        let r = resolvent_bound_scan(&a, &w, 1.7, &grid).unwrap();
        assert!(r.fitted_c <= 1.0 + 1e-12);
        assert!(matches!(
            resolvent_bound_scan(&a, &w, 0.0, &[C64::new(1.0, 0.0)]),
            Err(Error::SingularZ(_))
        ));
    }
}
