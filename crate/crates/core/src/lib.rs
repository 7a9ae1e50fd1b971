//! Multiple operator integrals, divided differences and related expansions on
//! finite-dimensional truncations.

pub mod divdiff;
pub mod error;
pub mod expansion;
pub mod fit;
pub mod heat;
pub mod hs;
pub mod jet;
pub mod linalg;
pub mod moi;
pub mod quadrature;
pub mod sobolev;
pub mod spectral;
pub mod symbol;

pub use divdiff::{divided_difference, divided_difference_opitz, DividedDifferenceSymbol};
pub use error::{Error, Result};
pub use expansion::{
    combinatorial_expand, commute1_residual, expansion_coeff, multiset_coeff, remainder_order_fit, taylor_expand,
    ExpansionResult, MultiIndex,
};
pub use heat::{
    abs_expansion, heat_trace_direct, heat_trace_expansion, spectral_action_expansion, theta_asymptotic_check,
    von_mangoldt, zeta_partial, AsymptoticFit, HeatKind, SpectralTripleModel,
};
pub use hs::{bump_tau, hs_apply, hs_divided_difference, resolvent_bound_scan, AlmostAnalyticExtension, QuadratureSpec};
pub use linalg::{CMat, C64};
pub use moi::{derivative_identity_residual, identity_residual, moi_evaluate, IdentityArg, IdentityKind, MoiProblem, Symbol};
pub use sobolev::{estimate_analytic_order, op_norm, sobolev_norm, TruncationFamily, WeightOperator};
pub use spectral::{apply_function, eig, eig_with_tol, HermitianOperator, SpectralDecomposition};
pub use symbol::{Interval, SymbolFunction};

/// Crate version, recorded in run summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
