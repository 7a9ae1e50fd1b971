//! Hermitian operators, clustered spectral decompositions and functional calculus.

use std::sync::OnceLock;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, is_diagonal, spectral_norm, CMat, C64, ONE, ZERO};
use crate::symbol::SymbolFunction;

pub const DEFAULT_HERMITIAN_TOL: f64 = 1e-12;
/// Relative clustering threshold: eigenvalues closer than `CLUSTER_REL * (1 + ||H||)` merge.
pub const CLUSTER_REL: f64 = 1e-10;

/// Spectrum grouped into distinct eigenvalues with their spectral projections.
///
/// The unitary `vectors` and the column-to-cluster map are kept so that
/// multiple operator integrals can work in the eigenbasis.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub cluster_tol: f64,
    vectors: CMat,
    cluster_of: Vec<usize>,
    /// Row of the unit entry in each column when `vectors` is a permutation.
    perm: Option<Vec<usize>>,
    projections: OnceLock<Vec<CMat>>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// Orthonormal eigenvectors, ordered so that clusters are contiguous and ascending.
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    /// Cluster index of each eigenvector column.
    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    /// Eigenvalue assigned to each column (the cluster representative).
    pub fn column_values(&self) -> Vec<f64> {
        self.cluster_of.iter().map(|&c| self.eigenvalues[c]).collect()
    }

    /// Spectral projections, one per distinct eigenvalue, built on first use.
    pub fn projections(&self) -> &[CMat] {
        self.projections.get_or_init(|| {
            (0..self.eigenvalues.len())
                .map(|k| {
                    let cols: Vec<usize> = (0..self.dim()).filter(|&j| self.cluster_of[j] == k).collect();
                    let u = self.vectors.select_columns(cols.iter());
                    &u * u.adjoint()
                })
                .collect()
        })
    }

    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.eigenvalues.len()];
        for &c in &self.cluster_of {
            r[c] += 1;
        }
        r
    }

    /// `sum_i g(lambda_i) P_i`.
    pub fn apply<F: Fn(f64) -> C64>(&self, g: F) -> CMat {
        let lam = self.column_values();
        self.apply_indexed(|j| g(lam[j]))
    }

    /// `U diag(g(0), .., g(d-1)) U*` for a value per eigenvector column.
    pub fn apply_indexed<F: Fn(usize) -> C64>(&self, g: F) -> CMat {
        let vals: Vec<C64> = (0..self.dim()).map(g).collect();
        if let Some(p) = &self.perm {
            let mut out = CMat::zeros(p.len(), p.len());
            for (j, v) in vals.iter().enumerate() {
                out[(p[j], p[j])] = *v;
            }
            return out;
        }
        let mut scaled = self.vectors.clone();
        for (j, v) in vals.iter().enumerate() {
            for z in scaled.column_mut(j).iter_mut() {
                *z *= *v;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `U* X U`: a matrix expressed in this eigenbasis on the left and `right` on the right.
    pub fn to_eigenbasis(&self, x: &CMat, right: &SpectralDecomposition) -> CMat {
        // keep identity arguments exactly diagonal so that zero entries can be skipped
        let is_identity = || {
            (0..x.nrows()).all(|i| (0..x.ncols()).all(|j| x[(i, j)] == if i == j { ONE } else { ZERO }))
        };
        if std::ptr::eq(self, right) && is_identity() {
            return x.clone();
        }
        if let (Some(pl), Some(pr)) = (&self.perm, &right.perm) {
            return CMat::from_fn(x.nrows(), x.ncols(), |a, b| x[(pl[a], pr[b])]);
        }
        self.vectors.adjoint() * x * &right.vectors
    }

    /// `U R V*`: inverse of [`Self::to_eigenbasis`].
    pub fn from_eigenbasis(&self, r: &CMat, right: &SpectralDecomposition) -> CMat {
        if let (Some(pl), Some(pr)) = (&self.perm, &right.perm) {
            let mut out = CMat::zeros(r.nrows(), r.ncols());
            for a in 0..r.nrows() {
                for b in 0..r.ncols() {
                    out[(pl[a], pr[b])] = r[(a, b)];
                }
            }
            return out;
        }
        &self.vectors * r * right.vectors.adjoint()
    }

    fn build(vectors: CMat, values: Vec<f64>, cluster_tol: f64, perm: Option<Vec<usize>>) -> Self {
        let n = values.len();
        let mut eigenvalues: Vec<f64> = Vec::new();
        let mut cluster_of = Vec::with_capacity(n);
        let mut start = 0;
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for i in 0..n {
            if i == 0 || values[i] - values[start] > cluster_tol {
                start = i;
                sums.push((0.0, 0));
            }
            let last = sums.last_mut().expect("cluster open");
            last.0 += values[i];
            last.1 += 1;
            cluster_of.push(sums.len() - 1);
        }
        for (s, c) in &sums {
            eigenvalues.push(s / *c as f64);
        }
        SpectralDecomposition {
            eigenvalues,
            cluster_tol,
            vectors,
            cluster_of,
            perm,
            projections: OnceLock::new(),
        }
    }
}

/// Dense self-adjoint matrix with a lazily computed, then frozen, spectral decomposition.
#[derive(Debug)]
pub struct HermitianOperator {
    entries: CMat,
    hermitian_tol: f64,
    eig: OnceLock<Result<SpectralDecomposition>>,
}

impl Clone for HermitianOperator {
    fn clone(&self) -> Self {
        let eig = OnceLock::new();
        if let Some(e) = self.eig.get() {
            let _ = eig.set(e.clone());
        }
        HermitianOperator {
            entries: self.entries.clone(),
            hermitian_tol: self.hermitian_tol,
            eig,
        }
    }
}

impl HermitianOperator {
    pub fn new(m: CMat) -> Result<Self> {
        Self::with_tol(m, DEFAULT_HERMITIAN_TOL)
    }

    /// Validates `||M - M*||_F <= tol * ||M||_F`, then stores the symmetrized matrix.
    pub fn with_tol(m: CMat, hermitian_tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let norm = frobenius(&m);
        let asym = frobenius(&(&m - m.adjoint()));
        if asym > hermitian_tol * norm {
            return Err(Error::NotHermitian {
                asymmetry: if norm > 0.0 { asym / norm } else { asym },
                tol: hermitian_tol,
            });
        }
        let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Ok(HermitianOperator {
            entries: sym,
            hermitian_tol,
            eig: OnceLock::new(),
        })
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        HermitianOperator {
            entries: crate::linalg::diag_real(d),
            hermitian_tol: DEFAULT_HERMITIAN_TOL,
            eig: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn hermitian_tol(&self) -> f64 {
        self.hermitian_tol
    }

    pub fn default_cluster_tol(&self) -> f64 {
        CLUSTER_REL * (1.0 + spectral_norm(&self.entries))
    }

    /// Cached decomposition with the default clustering threshold.
    pub fn eig(&self) -> Result<&SpectralDecomposition> {
        self.eig
            .get_or_init(|| eig_with_tol(&self.entries, self.default_cluster_tol()))
            .as_ref()
            .map_err(Clone::clone)
    }
}

/// Decomposition of the Hermitian operator with the default cluster tolerance.
pub fn eig(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    h.eig().cloned()
}

/// Decomposition of a Hermitian matrix, merging eigenvalues within `cluster_tol`.
pub fn eig_with_tol(m: &CMat, cluster_tol: f64) -> Result<SpectralDecomposition> {
    let n = m.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    let (vectors, values, perm) = if is_diagonal(m) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re));
        let mut u = CMat::zeros(n, n);
        for (j, &i) in order.iter().enumerate() {
            u[(i, j)] = C64::new(1.0, 0.0);
        }
        let values = order.iter().map(|&i| m[(i, i)].re).collect::<Vec<_>>();
        (u, values, Some(order))
    } else {
        let se = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::EigFailure("symmetric eigensolver did not converge".into()))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        if order.iter().any(|&i| !se.eigenvalues[i].is_finite()) {
            return Err(Error::EigFailure("non-finite eigenvalue".into()));
        }
        let u = se.eigenvectors.select_columns(order.iter());
        (u, order.iter().map(|&i| se.eigenvalues[i]).collect(), None)
    };
    Ok(SpectralDecomposition::build(vectors, values, cluster_tol, perm))
}

/// `f(H) = sum_i f(lambda_i) P_i`.
pub fn apply_function(f: &SymbolFunction, h: &HermitianOperator) -> Result<CMat> {
    let e = h.eig()?;
    for &l in &e.eigenvalues {
        f.check_domain(l)?;
    }
    Ok(e.apply(|x| f.value(x)))
}

/// Reconstruction error `||M - sum lambda_i P_i||_2 / ||M||_2`.
pub fn reconstruction_error(h: &HermitianOperator) -> Result<f64> {
    let e = h.eig()?;
    let mut rec = CMat::from_element(h.dim(), h.dim(), ZERO);
    for (l, p) in e.eigenvalues.iter().zip(e.projections()) {
        rec += p * C64::new(*l, 0.0);
    }
    let n = spectral_norm(h.matrix()).max(f64::MIN_POSITIVE);
    Ok(spectral_norm(&(h.matrix() - rec)) / n)
}
