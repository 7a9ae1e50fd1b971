use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: relative asymmetry {asymmetry:.3e} exceeds {tol:.3e}")]
    NotHermitian { asymmetry: f64, tol: f64 },
    #[error("eigendecomposition failed: {0}")]
    EigFailure(String),
    #[error("point {point} lies outside the domain ({lo}, {hi}) of `{name}`")]
    DomainViolation {
        name: String,
        point: f64,
        lo: f64,
        hi: f64,
    },
    #[error("derivative order {requested} exceeds max_order {max_order} of `{name}`")]
    OrderExceeded {
        name: String,
        requested: usize,
        max_order: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} truncation dimensions, got {got}")]
    InsufficientDims { needed: usize, got: usize },
    #[error("index {index} out of range (valid: {valid})")]
    BadIndex { index: usize, valid: String },
    #[error("expansion would need {terms} terms, above the guard of {limit}")]
    BlowupGuard { terms: u128, limit: u128 },
    #[error("integer overflow while computing {0}")]
    Overflow(String),
    #[error("eigenvalue {eigenvalue:.3e} is within {gap:.1e} of zero")]
    SpectralGapViolation { eigenvalue: f64, gap: f64 },
    #[error("truncation tail too fat: t*N^2 = {value:.3} < {required}")]
    TailTooFat { value: f64, required: f64 },
    #[error("Dirichlet series diverges at Re(s) = {re_s}")]
    DivergentRegion { re_s: f64 },
    #[error("argument {n} above the supported range {limit}")]
    RangeGuard { n: u64, limit: u64 },
    #[error("spectrum minimum {min_eig:.3e} too close to zero (need > {eps:.1e})")]
    SpectrumTooLow { min_eig: f64, eps: f64 },
    #[error("adaptive quadrature did not converge: estimate {estimate:.3e} after {cells} cells")]
    QuadratureStall { estimate: f64, cells: usize },
    #[error("resolvent singular at z = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },
    #[error("z = {0} lies on the real axis")]
    SingularZ(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("Taylor series for `{name}` did not converge within order {order}")]
    NoConvergence { name: String, order: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
