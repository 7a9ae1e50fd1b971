//! Dense complex matrix helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn diag_real(d: &[f64]) -> CMat {
    let n = d.len();
    let mut m = CMat::zeros(n, n);
    for (i, &x) in d.iter().enumerate() {
        m[(i, i)] = C64::new(x, 0.0);
    }
    m
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if is_diagonal(m) {
        return (0..m.nrows().min(m.ncols()))
            .map(|i| m[(i, i)].norm())
            .fold(0.0, f64::max);
    }
    m.clone().singular_values().max()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_diagonal(m: &CMat) -> bool {
    m.is_square()
        && m
            .iter()
            .enumerate()
            .all(|(k, z)| (k % m.nrows() == k / m.nrows()) || *z == ZERO)
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn check_square(m: &CMat, dim: usize) -> Result<()> {
    if m.nrows() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.nrows(),
        });
    }
    if m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.ncols(),
        });
    }
    Ok(())
}

pub fn trace(m: &CMat) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Random complex matrix with independent standard normal-ish entries scaled by `scale`.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMat {
    CMat::from_fn(dim, dim, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
    })
}

/// Random Hermitian matrix `(M + M*)/2`, entries bounded by `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> CMat {
    let m = random_matrix(rng, dim, scale);
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CVec {
    CVec::from_fn(dim, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Seeded generator used by property suites and the CLI.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Japanese bracket `(1 + x^2)^{1/2}`.
pub fn japanese(x: f64) -> f64 {
    x.hypot(1.0)
}
