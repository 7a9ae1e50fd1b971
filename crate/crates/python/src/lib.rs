//! Python bindings. Matrices cross the boundary as nested lists of complex numbers
//! (real numbers are accepted on input); errors from the core become `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use moilab_core::heat::{inverse_log_coeff, mangoldt_over_log, TraceExpansion};
use moilab_core::hs::{default_order, Bump};
use moilab_core::moi::{moi_dd, moi_dd_same};
use moilab_core::sobolev::uniform_grid;
use moilab_core::{
    CMat, Error, QuadratureSpec, SpectralTripleModel, SymbolFunction, TruncationFamily, WeightOperator, C64,
};

type Rows = Vec<Vec<C64>>;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_mat(rows: &Rows) -> PyResult<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("ragged matrix rows"));
    }
    Ok(CMat::from_fn(n, m, |i, j| rows[i][j]))
}

fn to_rows(m: &CMat) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn mats(xs: &[Rows]) -> PyResult<Vec<CMat>> {
    xs.iter().map(to_mat).collect()
}

/// Scalar function with derivatives, from the built-in catalogue.
#[pyclass(name = "Function", module = "moilab", frozen)]
#[derive(Clone)]
struct PyFunction {
    inner: SymbolFunction,
}

#[pymethods]
impl PyFunction {
    #[staticmethod]
    fn exp() -> Self {
        SymbolFunction::exp().into()
    }

    #[staticmethod]
    fn exp_neg() -> Self {
        SymbolFunction::exp_neg().into()
    }

    #[staticmethod]
    #[pyo3(signature = (c = 1.0))]
    fn gauss(c: f64) -> Self {
        SymbolFunction::gauss(c).into()
    }

    #[staticmethod]
    fn sin() -> Self {
        SymbolFunction::sin().into()
    }

    #[staticmethod]
    fn lorentz() -> Self {
        SymbolFunction::lorentz().into()
    }

    #[staticmethod]
    fn recip_sqrt() -> Self {
        SymbolFunction::recip_sqrt().into()
    }

    /// Polynomial with ascending coefficients.
    #[staticmethod]
    fn poly(coeffs: Vec<f64>) -> Self {
        SymbolFunction::poly(coeffs).into()
    }

    #[staticmethod]
    fn identity() -> Self {
        SymbolFunction::identity().into()
    }

    fn with_max_order(&self, k: usize) -> Self {
        self.inner.clone().with_max_order(k).into()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn max_order(&self) -> usize {
        self.inner.max_order()
    }

    fn __call__(&self, x: f64) -> PyResult<C64> {
        self.inner.check_domain(x).map_err(err)?;
        Ok(self.inner.value(x))
    }

    fn derivative(&self, k: usize, x: f64) -> PyResult<C64> {
        self.inner.try_derivative(k, x).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Function({:?}, max_order={})", self.inner.name(), self.inner.max_order())
    }
}

impl From<SymbolFunction> for PyFunction {
    fn from(inner: SymbolFunction) -> Self {
        PyFunction { inner }
    }
}

/// Hermitian matrix with a cached spectral decomposition.
#[pyclass(name = "HermitianOperator", module = "moilab", frozen)]
#[derive(Clone)]
struct PyHermitian {
    inner: moilab_core::HermitianOperator,
}

#[pymethods]
impl PyHermitian {
    #[new]
    fn new(rows: Rows) -> PyResult<Self> {
        let inner = moilab_core::HermitianOperator::new(to_mat(&rows)?).map_err(err)?;
        Ok(PyHermitian { inner })
    }

    #[staticmethod]
    fn diagonal(d: Vec<f64>) -> Self {
        PyHermitian {
            inner: moilab_core::HermitianOperator::from_real_diagonal(&d),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn matrix(&self) -> Rows {
        to_rows(self.inner.matrix())
    }

    /// Eigenvalues in ascending order, with multiplicity.
    fn eigenvalues(&self) -> PyResult<Vec<f64>> {
        let mut v = self.inner.eig().map_err(err)?.column_values();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    /// `f(H)` by the spectral theorem.
    fn apply(&self, f: &PyFunction) -> PyResult<Rows> {
        moilab_core::apply_function(&f.inner, &self.inner).map(|m| to_rows(&m)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("HermitianOperator(dim={})", self.inner.dim())
    }
}

/// Finite spectral-triple model `(D, V, P)`.
#[pyclass(name = "Model", module = "moilab", frozen)]
struct PyModel {
    inner: SpectralTripleModel,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (d, v, p = None))]
    fn new(d: &PyHermitian, v: &PyHermitian, p: Option<Rows>) -> PyResult<Self> {
        let p = match p {
            Some(rows) => to_mat(&rows)?,
            None => CMat::identity(d.inner.dim(), d.inner.dim()),
        };
        let inner = SpectralTripleModel::new(d.inner.clone(), v.inner.clone(), p).map_err(err)?;
        Ok(PyModel { inner })
    }

    /// `D = diag(1..dim)`, `V = v0 I`, `P = I`.
    #[staticmethod]
    fn diag_family(dim: usize, v0: f64) -> PyResult<Self> {
        SpectralTripleModel::diag_family(dim, v0).map(|inner| PyModel { inner }).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
}

/// `f^{[n]}(x_0, .., x_n)`.
#[pyfunction]
#[pyo3(signature = (f, nodes, confluence_tol = moilab_core::divdiff::DEFAULT_CONFLUENCE_TOL))]
fn divided_difference(f: &PyFunction, nodes: Vec<f64>, confluence_tol: f64) -> PyResult<C64> {
    moilab_core::divided_difference(&f.inner, &nodes, confluence_tol).map_err(err)
}

/// `T_{f^{[n]}}^{H_0..H_n}(X_1..X_n)`. A single operator is used in every slot.
#[pyfunction]
fn moi(py: Python<'_>, f: &PyFunction, h: &Bound<'_, PyAny>, xs: Vec<Rows>) -> PyResult<Rows> {
    let xs = mats(&xs)?;
    let xr: Vec<&CMat> = xs.iter().collect();
    let out = if let Ok(single) = h.downcast::<PyHermitian>() {
        let h = single.get().inner.clone();
        py.allow_threads(|| moi_dd_same(&f.inner, &h, &xr))
    } else {
        let hs: Vec<PyRef<'_, PyHermitian>> = h.extract()?;
        let hs: Vec<moilab_core::HermitianOperator> = hs.iter().map(|h| h.inner.clone()).collect();
        let hr: Vec<_> = hs.iter().collect();
        py.allow_threads(|| moi_dd(&f.inner, &hr, &xr))
    };
    out.map(|m| to_rows(&m)).map_err(err)
}

/// Spectral norm of `FD_n(t -> f(H + tV)) / n! - T_{f^{[n]}}^{H..H}(V..V)`.
#[pyfunction]
#[pyo3(signature = (f, h, v, n, step = 1e-2))]
fn derivative_identity_residual(f: &PyFunction, h: &PyHermitian, v: &PyHermitian, n: usize, step: f64) -> PyResult<f64> {
    moilab_core::derivative_identity_residual(&f.inner, &h.inner, &v.inner, n, step).map_err(err)
}

/// Taylor expansion of `f(H + V)`; returns remainder norms per order.
#[pyfunction]
fn taylor_expand<'py>(py: Python<'py>, f: &PyFunction, h: &PyHermitian, v: &PyHermitian, order: usize) -> PyResult<Bound<'py, PyDict>> {
    let t = moilab_core::taylor_expand(&f.inner, &h.inner, &v.inner, order).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("remainder_norms", &t.result.remainder_norms)?;
    d.set_item("term_counts", &t.result.term_counts)?;
    d.set_item("remainder_identity_residuals", &t.remainder_identity_residuals)?;
    d.set_item("exact", to_rows(&t.result.exact))?;
    Ok(d)
}

/// Commutator expansion of `T_{f^{[n]}}^{H..H}(X_1..X_n)`.
#[pyfunction]
fn combinatorial_expand<'py>(py: Python<'py>, f: &PyFunction, h: &PyHermitian, xs: Vec<Rows>, order: usize) -> PyResult<Bound<'py, PyDict>> {
    let xs = mats(&xs)?;
    let xr: Vec<&CMat> = xs.iter().collect();
    let r = moilab_core::combinatorial_expand(&f.inner, &h.inner, &xr, order).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("remainder_norms", &r.remainder_norms)?;
    d.set_item("term_counts", &r.term_counts)?;
    d.set_item("exact", to_rows(&r.exact))?;
    d.set_item("partial_sums", r.partial_sums.iter().map(to_rows).collect::<Vec<_>>())?;
    Ok(d)
}

fn trace_dict<'py>(py: Python<'py>, e: &TraceExpansion) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t_grid", &e.t_grid)?;
    d.set_item("direct", &e.direct)?;
    d.set_item("partial_sums", &e.partial_sums)?;
    d.set_item("remainders", &e.remainders)?;
    d.set_item("term_counts", &e.term_counts)?;
    if e.t_grid.len() >= 4 {
        let slopes: Vec<Option<f64>> = e.fit().map_err(err)?.iter().map(|f| f.fit.as_ref().map(|l| l.slope)).collect();
        d.set_item("slopes", slopes)?;
    }
    Ok(d)
}

/// Expansion of `Tr(P e^{-t(D+V)^2})` (`kind="square"`) or `Tr(P e^{-t|D+V|})` (`kind="abs"`).
#[pyfunction]
#[pyo3(signature = (model, order, t_grid, kind = "square"))]
fn heat_trace_expansion<'py>(py: Python<'py>, model: &PyModel, order: usize, t_grid: Vec<f64>, kind: &str) -> PyResult<Bound<'py, PyDict>> {
    let e = match kind {
        "square" => py.allow_threads(|| moilab_core::heat_trace_expansion(&model.inner, order, &t_grid)),
        "abs" => py.allow_threads(|| moilab_core::abs_expansion(&model.inner, order, &t_grid)),
        other => return Err(PyValueError::new_err(format!("unknown kind {other:?}, expected \"square\" or \"abs\""))),
    }
    .map_err(err)?;
    trace_dict(py, &e)
}

/// `Tr f(tD + tV)` in the expanded form and at the operator-integral level.
#[pyfunction]
fn spectral_action_expansion<'py>(py: Python<'py>, model: &PyModel, f: &PyFunction, order: usize, t_grid: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let sa = py
        .allow_threads(|| moilab_core::spectral_action_expansion(&model.inner, &f.inner, order, &t_grid))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("expanded", trace_dict(py, &sa.expanded)?)?;
    d.set_item("moi_level", trace_dict(py, &sa.moi_level)?)?;
    d.set_item("mutual", &sa.mutual)?;
    Ok(d)
}

/// Fit `c_- t^{-1/2} + c_0` to `sum_{n <= nmax} e^{-t n^2}`; returns `(c_-, c_0, max residual)`.
#[pyfunction]
fn theta_asymptotic(nmax: usize, t_grid: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let fit = moilab_core::theta_asymptotic_check(nmax, &t_grid).map_err(err)?;
    Ok((fit.coefficients[0], fit.coefficients[1], fit.max_residual()))
}

/// Partial Dirichlet sum `sum_{n <= nmax} a_n n^{-s}` and its tail bound.
/// `coefficients` is `"inverse-log"` or `"mangoldt-over-log"`.
#[pyfunction]
fn zeta_partial(coefficients: &str, s: C64, nmax: u64) -> PyResult<(C64, f64)> {
    let z = match coefficients {
        "inverse-log" => moilab_core::zeta_partial(inverse_log_coeff, 1.0 / ((nmax + 1) as f64).ln(), s, nmax),
        "mangoldt-over-log" => moilab_core::zeta_partial(mangoldt_over_log, 1.0, s, nmax),
        other => return Err(PyValueError::new_err(format!("unknown coefficients {other:?}"))),
    }
    .map_err(err)?;
    Ok((z.value, z.tail_bound))
}

fn quadrature(rel_tol: Option<f64>) -> QuadratureSpec {
    let mut q = QuadratureSpec::default();
    if let Some(t) = rel_tol {
        q.rel_tol = t;
    }
    q
}

/// `f(A)` by the Helffer–Sjöstrand formula; returns `(matrix, error estimate)`.
#[pyfunction]
#[pyo3(signature = (f, a, order = 3, rel_tol = None))]
fn hs_apply(py: Python<'_>, f: &PyFunction, a: Rows, order: usize, rel_tol: Option<f64>) -> PyResult<(Rows, f64)> {
    let a = to_mat(&a)?;
    let spec = quadrature(rel_tol);
    let (m, report) = py
        .allow_threads(|| moilab_core::hs_apply(&f.inner, &a, order, Bump::Psi, &spec))
        .map_err(err)?;
    Ok((to_rows(&m), report.error_estimate))
}

/// `f^{[n]}(x_0..x_n)` by the contour formula; returns `(value, error estimate)`.
#[pyfunction]
#[pyo3(signature = (f, nodes, order = None, rel_tol = None))]
fn hs_divided_difference(f: &PyFunction, nodes: Vec<f64>, order: Option<usize>, rel_tol: Option<f64>) -> PyResult<(C64, f64)> {
    let n = order.unwrap_or_else(|| default_order(nodes.len().saturating_sub(1)));
    let (v, report) = moilab_core::hs_divided_difference(&f.inner, &nodes, n, Bump::Psi, &quadrature(rel_tol)).map_err(err)?;
    Ok((v, report.error_estimate))
}

/// `||Theta^s A Theta^{-(s+r)}||` for the diagonal weight `Theta = diag(weights)`.
#[pyfunction]
fn op_norm(a: Rows, s: f64, r: f64, weights: Vec<f64>) -> PyResult<f64> {
    let w = WeightOperator::diagonal(&weights).map_err(err)?;
    moilab_core::op_norm(&to_mat(&a)?, s, r, &w).map_err(err)
}

/// Analytic order of `diag(1..N)^power`, or `None` if no grid point is bounded.
#[pyfunction]
#[pyo3(signature = (power, dims = vec![50, 100, 200, 400], r_lo = -2.0, r_hi = 4.0, r_step = 0.02, s_probe = 0.0))]
fn analytic_order(power: f64, dims: Vec<usize>, r_lo: f64, r_hi: f64, r_step: f64, s_probe: f64) -> PyResult<Option<f64>> {
    let family = TruncationFamily::diag_linear(dims, power);
    let grid = uniform_grid(r_lo, r_hi, r_step);
    moilab_core::estimate_analytic_order(&family, &grid, s_probe).map(|r| r.order).map_err(err)
}

#[pymodule]
#[pyo3(name = "moilab")]
fn moilab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", moilab_core::VERSION)?;
    m.add_class::<PyFunction>()?;
    m.add_class::<PyHermitian>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(divided_difference, m)?)?;
    m.add_function(wrap_pyfunction!(moi, m)?)?;
    m.add_function(wrap_pyfunction!(derivative_identity_residual, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_expand, m)?)?;
    m.add_function(wrap_pyfunction!(combinatorial_expand, m)?)?;
    m.add_function(wrap_pyfunction!(heat_trace_expansion, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_action_expansion, m)?)?;
    m.add_function(wrap_pyfunction!(theta_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(zeta_partial, m)?)?;
    m.add_function(wrap_pyfunction!(hs_apply, m)?)?;
    m.add_function(wrap_pyfunction!(hs_divided_difference, m)?)?;
    m.add_function(wrap_pyfunction!(op_norm, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_order, m)?)?;
    Ok(())
}
