//! Experiment configuration: JSON schema, defaults and semantic validation.

use std::fmt;
use std::path::PathBuf;

use moilab_core::hs::QuadratureSpec;
use moilab_core::SymbolFunction;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Experiment names in the order `moilab list` prints them.
pub const EXPERIMENTS: [&str; 10] = [
    "moi",
    "identities",
    "taylor",
    "combinatorial",
    "heat-trace",
    "spectral-action",
    "theta-asymptotic",
    "zeta",
    "hs-calc",
    "order-estimate",
];

#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.message)
    }
}

fn invalid(field: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError {
        message: format!("field `{field}`: {msg}"),
    }
}

/// Parses a config, reporting the offending field path and line/column on failure.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    // Internally tagged enums buffer their content and lose the field path, so the tag is
    // read first and the body deserialized into the matching struct.
    let mut body: Value = serde_json::from_str(text).map_err(|e| ConfigError { message: e.to_string() })?;
    let obj = body.as_object_mut().ok_or_else(|| ConfigError {
        message: "config must be a JSON object".into(),
    })?;
    let tag = match obj.remove("experiment") {
        Some(Value::String(t)) => t,
        Some(_) => return Err(ConfigError { message: "`experiment` must be a string".into() }),
        None => return Err(ConfigError { message: "missing `experiment`".into() }),
    };
    fn body_as<T: serde::de::DeserializeOwned>(body: Value) -> Result<T, ConfigError> {
        serde_path_to_error::deserialize(body).map_err(|e| ConfigError {
            message: format!("at `{}`: {}", e.path(), e.inner()),
        })
    }
    use ExperimentConfig as E;
    let cfg = match tag.as_str() {
        "moi" => E::Moi(body_as(body)?),
        "identities" => E::Identities(body_as(body)?),
        "taylor" => E::Taylor(body_as(body)?),
        "combinatorial" => E::Combinatorial(body_as(body)?),
        "heat-trace" => E::HeatTrace(body_as(body)?),
        "spectral-action" => E::SpectralAction(body_as(body)?),
        "theta-asymptotic" => E::ThetaAsymptotic(body_as(body)?),
        "zeta" => E::Zeta(body_as(body)?),
        "hs-calc" => E::HsCalc(body_as(body)?),
        "order-estimate" => E::OrderEstimate(body_as(body)?),
        other => {
            return Err(ConfigError {
                message: format!("unknown experiment `{other}`, expected one of {}", EXPERIMENTS.join(", ")),
            })
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for the CSV and JSON artifacts; `--out` takes precedence.
    pub dir: Option<PathBuf>,
    /// File stem; defaults to the experiment name.
    pub stem: Option<String>,
}

/// A named scalar function from the built-in catalogue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    /// One of `exp`, `exp-neg`, `gauss`, `sin`, `lorentz`, `recip-sqrt`, `poly`, `identity`.
    pub name: String,
    /// Width parameter `c` of `gauss` (`exp(-c x^2)`).
    #[serde(default)]
    pub c: Option<f64>,
    /// Ascending coefficients of `poly`.
    #[serde(default)]
    pub coeffs: Option<Vec<f64>>,
    /// Caps the number of derivatives available.
    #[serde(default)]
    pub max_order: Option<usize>,
}

impl FunctionSpec {
    pub fn named(name: &str) -> Self {
        FunctionSpec {
            name: name.into(),
            c: None,
            coeffs: None,
            max_order: None,
        }
    }

    pub fn build(&self) -> Result<SymbolFunction, ConfigError> {
        let f = match self.name.as_str() {
            "exp" => SymbolFunction::exp(),
            "exp-neg" => SymbolFunction::exp_neg(),
            "gauss" => {
                let c = self.c.unwrap_or(1.0);
                if !(c > 0.0 && c.is_finite()) {
                    return Err(invalid("function.c", format!("must be positive, got {c}")));
                }
                SymbolFunction::gauss(c)
            }
            "sin" => SymbolFunction::sin(),
            "lorentz" => SymbolFunction::lorentz(),
            "recip-sqrt" => SymbolFunction::recip_sqrt(),
            "identity" => SymbolFunction::identity(),
            "poly" => match &self.coeffs {
                Some(c) if !c.is_empty() => SymbolFunction::poly(c.clone()),
                _ => return Err(invalid("function.coeffs", "`poly` needs a nonempty coefficient list")),
            },
            other => return Err(invalid("function.name", format!("unknown function `{other}`"))),
        };
        if self.c.is_some() && self.name != "gauss" {
            return Err(invalid("function.c", "only `gauss` takes `c`"));
        }
        if self.coeffs.is_some() && self.name != "poly" {
            return Err(invalid("function.coeffs", "only `poly` takes `coeffs`"));
        }
        Ok(match self.max_order {
            Some(k) => f.with_max_order(k),
            None => f,
        })
    }

    /// Degree when the function is a polynomial.
    pub fn degree(&self) -> Option<usize> {
        match (self.name.as_str(), &self.coeffs) {
            ("poly", Some(c)) => Some(c.len().saturating_sub(1)),
            ("identity", _) => Some(1),
            _ => None,
        }
    }

    /// Fails with a message naming the precondition unless derivatives up to `k` exist.
    fn require_order(&self, field: &str, k: usize, why: &str) -> Result<(), ConfigError> {
        let f = self.build()?;
        if f.max_order() < k {
            return Err(invalid(
                field,
                format!("{why} needs derivatives up to order {k}, but `{}` has max_order {}", self.name, f.max_order()),
            ));
        }
        Ok(())
    }
}

fn exp_fn() -> FunctionSpec {
    FunctionSpec::named("exp")
}

fn gauss_fn() -> FunctionSpec {
    FunctionSpec::named("gauss")
}

/// Spectral triple truncation `(D, V, P)` for the trace experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// `D = diag(1..dim)`, `V = v0 I`, `P = I`.
    DiagLinear { dim: usize, v0: f64 },
    /// `D = diag(d_min + (d_max - d_min) k/(dim-1))`, random Hermitian `V` of norm `v_norm`, `P = I`.
    Random {
        dim: usize,
        #[serde(default = "one")]
        d_min: f64,
        d_max: f64,
        v_norm: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Real symmetric matrices given row by row; `P` defaults to the identity.
    Inline {
        d: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
        #[serde(default)]
        p: Option<Vec<Vec<f64>>>,
    },
}

impl ModelSpec {
    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        match self {
            ModelSpec::DiagLinear { dim, v0 } => {
                positive_usize(&format!("{field}.dim"), *dim)?;
                finite(&format!("{field}.v0"), *v0)?;
            }
            ModelSpec::Random { dim, d_min, d_max, v_norm, .. } => {
                positive_usize(&format!("{field}.dim"), *dim)?;
                finite(&format!("{field}.d_min"), *d_min)?;
                finite(&format!("{field}.v_norm"), *v_norm)?;
                if !(d_max >= d_min) {
                    return Err(invalid(&format!("{field}.d_max"), "must be at least d_min"));
                }
            }
            ModelSpec::Inline { d, v, p } => {
                let n = d.len();
                positive_usize(&format!("{field}.d"), n)?;
                square(&format!("{field}.d"), d, n)?;
                square(&format!("{field}.v"), v, n)?;
                if let Some(p) = p {
                    square(&format!("{field}.p"), p, n)?;
                }
            }
        }
        Ok(())
    }
}

fn one() -> f64 {
    1.0
}

fn square(field: &str, m: &[Vec<f64>], n: usize) -> Result<(), ConfigError> {
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(invalid(field, format!("expected a {n}x{n} matrix")));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(())
}

fn positive_usize(field: &str, v: usize) -> Result<(), ConfigError> {
    if v == 0 {
        return Err(invalid(field, "must be positive"));
    }
    Ok(())
}

fn finite(field: &str, v: f64) -> Result<(), ConfigError> {
    if !v.is_finite() {
        return Err(invalid(field, "must be finite"));
    }
    Ok(())
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(field, format!("must be positive, got {v}")));
    }
    Ok(())
}

fn positive_grid(field: &str, g: &[f64], min_len: usize) -> Result<(), ConfigError> {
    if g.len() < min_len {
        return Err(invalid(field, format!("needs at least {min_len} points")));
    }
    if g.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(invalid(field, "entries must be positive"));
    }
    Ok(())
}

/// `n` points geometrically spaced from `lo` to `hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityName {
    Left,
    Middle,
    Right,
    Perturbation,
    Loewner,
}

impl IdentityName {
    pub const ALL: [IdentityName; 5] = [
        IdentityName::Left,
        IdentityName::Middle,
        IdentityName::Right,
        IdentityName::Perturbation,
        IdentityName::Loewner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IdentityName::Left => "left",
            IdentityName::Middle => "middle",
            IdentityName::Right => "right",
            IdentityName::Perturbation => "perturbation",
            IdentityName::Loewner => "loewner",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    Square,
    Abs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coefficients {
    /// `a_n = 1/log n` for `n >= 2`.
    InverseLog,
    /// `a_n = Lambda(n)/log n`.
    MangoldtOverLog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Moi(MoiConfig),
    Identities(IdentitiesConfig),
    Taylor(TaylorConfig),
    Combinatorial(CombinatorialConfig),
    HeatTrace(HeatTraceConfig),
    SpectralAction(SpectralActionConfig),
    ThetaAsymptotic(ThetaConfig),
    Zeta(ZetaConfig),
    HsCalc(HsConfig),
    OrderEstimate(OrderConfig),
}

/// Random `T_{f^[n]}^{H..H}(V..V)` checked against finite differences of `t -> f(H + tV)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoiConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d10")]
    pub draws: usize,
    #[serde(default = "d6")]
    pub dim: usize,
    #[serde(default = "d2")]
    pub n: usize,
    #[serde(default = "exp_fn")]
    pub function: FunctionSpec,
    #[serde(default = "one")]
    pub h_norm: f64,
    #[serde(default = "v_norm_default")]
    pub v_norm: f64,
    #[serde(default = "step_default")]
    pub step: f64,
    #[serde(default = "fd_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d50")]
    pub draws: usize,
    #[serde(default = "d8")]
    pub max_dim: usize,
    #[serde(default = "d3")]
    pub max_n: usize,
    #[serde(default = "identity_functions")]
    pub functions: Vec<FunctionSpec>,
    #[serde(default = "all_identities")]
    pub kinds: Vec<IdentityName>,
    #[serde(default = "tight_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaylorConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d5")]
    pub dim: usize,
    #[serde(default = "exp_fn")]
    pub function: FunctionSpec,
    #[serde(default = "d3")]
    pub order: usize,
    #[serde(default = "one")]
    pub h_norm: f64,
    #[serde(default = "three")]
    pub v_norm: f64,
    #[serde(default = "taylor_scales")]
    pub scales: Vec<f64>,
    #[serde(default = "slope_tol_taylor")]
    pub slope_tolerance: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinatorialConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d10")]
    pub draws: usize,
    #[serde(default = "d6")]
    pub dim: usize,
    #[serde(default = "d2")]
    pub n: usize,
    #[serde(default = "d3")]
    pub order: usize,
    #[serde(default = "exp_fn")]
    pub function: FunctionSpec,
    /// Scalings `s` of `H` for the remainder-order fit; skipped when empty.
    #[serde(default = "taylor_scales")]
    pub scales: Vec<f64>,
    #[serde(default = "tight_tol")]
    pub tolerance: f64,
    #[serde(default = "slope_tol_taylor")]
    pub slope_tolerance: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatTraceConfig {
    pub model: ModelSpec,
    #[serde(default = "square_kind")]
    pub kind: TraceKind,
    #[serde(default = "d3")]
    pub order: usize,
    pub t_grid: Vec<f64>,
    /// Order of `V`; square-kind remainders are expected to decay like `t^{(N+1-s)/2}`.
    #[serde(default = "one")]
    pub s: f64,
    /// Overrides the expected slopes for orders `1..=order`.
    #[serde(default)]
    pub expected_slopes: Option<Vec<f64>>,
    /// Orders whose slope is checked; all of `1..=order` by default.
    #[serde(default)]
    pub check_orders: Option<Vec<usize>>,
    #[serde(default = "slope_tol_heat")]
    pub slope_tolerance: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralActionConfig {
    pub model: ModelSpec,
    #[serde(default = "gauss_fn")]
    pub function: FunctionSpec,
    #[serde(default = "d2")]
    pub order: usize,
    pub t_grid: Vec<f64>,
    /// Remainders are expected to decay like `t^{N+1-s}`.
    #[serde(default = "one")]
    pub s: f64,
    #[serde(default)]
    pub expected_slopes: Option<Vec<f64>>,
    #[serde(default)]
    pub check_orders: Option<Vec<usize>>,
    #[serde(default = "slope_tol_heat")]
    pub slope_tolerance: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    #[serde(default = "d2000")]
    pub nmax: usize,
    #[serde(default = "theta_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "theta_tol_minus")]
    pub tolerance_leading: f64,
    #[serde(default = "theta_tol_zero")]
    pub tolerance_constant: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaConfig {
    #[serde(default = "d100000")]
    pub nmax: u64,
    #[serde(default = "zeta_coeffs")]
    pub coefficients: Vec<Coefficients>,
    /// Points `[Re s, Im s]` at which the partial sums are tabulated.
    #[serde(default = "zeta_points")]
    pub points: Vec<[f64; 2]>,
    /// Also run the derivative and log-zeta identities.
    #[serde(default = "yes")]
    pub identities: bool,
    #[serde(default = "zeta_tol_derivative")]
    pub tolerance_derivative: f64,
    #[serde(default = "zeta_tol_sum")]
    pub tolerance_sum: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HsConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d5")]
    pub dim: usize,
    #[serde(default = "d10")]
    pub cases: usize,
    #[serde(default = "d30")]
    pub dd_cases: usize,
    #[serde(default = "gauss_fn")]
    pub function: FunctionSpec,
    /// Order of the almost-analytic extension; defaults to `n + 2`.
    #[serde(default)]
    pub extension_order: Option<usize>,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default = "hs_tol_apply")]
    pub tolerance_apply: f64,
    #[serde(default = "hs_tol_dd")]
    pub tolerance_dd: f64,
    /// Compare the two built-in bumps on the matrix cases.
    #[serde(default = "yes")]
    pub compare_bumps: bool,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderConfig {
    #[serde(default = "order_dims")]
    pub dims: Vec<usize>,
    /// Powers `k` of the families `A_N = Theta_N^k`.
    #[serde(default = "order_powers")]
    pub powers: Vec<f64>,
    #[serde(default = "order_grid")]
    pub r_grid: RGrid,
    #[serde(default)]
    pub s_probe: f64,
    #[serde(default = "order_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: OutputSpec,
}

macro_rules! consts {
    ($($name:ident: $t:ty = $v:expr;)*) => {
        $(fn $name() -> $t { $v })*
    };
}

consts! {
    d2: usize = 2;
    d3: usize = 3;
    d5: usize = 5;
    d6: usize = 6;
    d8: usize = 8;
    d10: usize = 10;
    d30: usize = 30;
    d50: usize = 50;
    d2000: usize = 2000;
    d100000: u64 = 100_000;
    three: f64 = 3.0;
    v_norm_default: f64 = 2.75;
    step_default: f64 = 1e-2;
    fd_tol: f64 = 1e-6;
    tight_tol: f64 = 1e-9;
    slope_tol_taylor: f64 = 0.1;
    slope_tol_heat: f64 = 0.15;
    theta_tol_minus: f64 = 1e-4;
    theta_tol_zero: f64 = 1e-3;
    zeta_tol_derivative: f64 = 1e-3;
    zeta_tol_sum: f64 = 1e-4;
    hs_tol_apply: f64 = 1e-4;
    hs_tol_dd: f64 = 1e-5;
    order_tol: f64 = 0.05;
    yes: bool = true;
    square_kind: TraceKind = TraceKind::Square;
    taylor_scales: Vec<f64> = logspace(1e-3, 1e-1, 7);
    theta_grid: Vec<f64> = logspace(1e-3, 1e-1, 9);
    zeta_points: Vec<[f64; 2]> = vec![[2.0, 0.0], [3.0, 0.0], [2.0, 5.0]];
    zeta_coeffs: Vec<Coefficients> = vec![Coefficients::InverseLog, Coefficients::MangoldtOverLog];
    order_dims: Vec<usize> = vec![50, 100, 200, 400];
    order_powers: Vec<f64> = vec![0.0, 1.0, 2.0];
    order_grid: RGrid = RGrid { lo: -2.0, hi: 4.0, step: 0.02 };
    all_identities: Vec<IdentityName> = IdentityName::ALL.to_vec();
    identity_functions: Vec<FunctionSpec> = vec![
        FunctionSpec::named("exp"),
        FunctionSpec::named("lorentz"),
        FunctionSpec { coeffs: Some(vec![0.3, -1.0, 0.5, 0.2, -0.1, 0.05]), ..FunctionSpec::named("poly") },
    ];
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Moi(_) => "moi",
            ExperimentConfig::Identities(_) => "identities",
            ExperimentConfig::Taylor(_) => "taylor",
            ExperimentConfig::Combinatorial(_) => "combinatorial",
            ExperimentConfig::HeatTrace(_) => "heat-trace",
            ExperimentConfig::SpectralAction(_) => "spectral-action",
            ExperimentConfig::ThetaAsymptotic(_) => "theta-asymptotic",
            ExperimentConfig::Zeta(_) => "zeta",
            ExperimentConfig::HsCalc(_) => "hs-calc",
            ExperimentConfig::OrderEstimate(_) => "order-estimate",
        }
    }

    pub fn output(&self) -> &OutputSpec {
        match self {
            ExperimentConfig::Moi(c) => &c.output,
            ExperimentConfig::Identities(c) => &c.output,
            ExperimentConfig::Taylor(c) => &c.output,
            ExperimentConfig::Combinatorial(c) => &c.output,
            ExperimentConfig::HeatTrace(c) => &c.output,
            ExperimentConfig::SpectralAction(c) => &c.output,
            ExperimentConfig::ThetaAsymptotic(c) => &c.output,
            ExperimentConfig::Zeta(c) => &c.output,
            ExperimentConfig::HsCalc(c) => &c.output,
            ExperimentConfig::OrderEstimate(c) => &c.output,
        }
    }

    /// Seed recorded in the summary, for experiments that draw random data.
    pub fn seed(&self) -> Option<u64> {
        match self {
            ExperimentConfig::Moi(c) => Some(c.seed),
            ExperimentConfig::Identities(c) => Some(c.seed),
            ExperimentConfig::Taylor(c) => Some(c.seed),
            ExperimentConfig::Combinatorial(c) => Some(c.seed),
            ExperimentConfig::HsCalc(c) => Some(c.seed),
            ExperimentConfig::HeatTrace(HeatTraceConfig { model: ModelSpec::Random { seed, .. }, .. })
            | ExperimentConfig::SpectralAction(SpectralActionConfig { model: ModelSpec::Random { seed, .. }, .. }) => Some(*seed),
            _ => None,
        }
    }

    /// Semantic checks that need no computation beyond building the functions.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            ExperimentConfig::Moi(c) => {
                positive_usize("draws", c.draws)?;
                positive_usize("dim", c.dim)?;
                if !(1..=3).contains(&c.n) {
                    return Err(invalid("n", format!("finite-difference stencils exist for 1 <= n <= 3, got {}", c.n)));
                }
                c.function.require_order("n", c.n + 2, &format!("n = {}", c.n))?;
                positive("h_norm", c.h_norm)?;
                positive("v_norm", c.v_norm)?;
                positive("step", c.step)?;
                positive("tolerance", c.tolerance)?;
            }
            ExperimentConfig::Identities(c) => {
                positive_usize("draws", c.draws)?;
                if c.max_dim < 2 {
                    return Err(invalid("max_dim", "must be at least 2"));
                }
                if c.max_n < 2 && c.kinds.contains(&IdentityName::Middle) {
                    return Err(invalid("max_n", "the middle identity needs n >= 2"));
                }
                positive_usize("max_n", c.max_n)?;
                if c.functions.is_empty() {
                    return Err(invalid("functions", "must not be empty"));
                }
                if c.kinds.is_empty() {
                    return Err(invalid("kinds", "must not be empty"));
                }
                for (i, f) in c.functions.iter().enumerate() {
                    f.require_order(&format!("functions[{i}]"), c.max_n + 2, &format!("max_n = {}", c.max_n))?;
                }
                positive("tolerance", c.tolerance)?;
            }
            ExperimentConfig::Taylor(c) => {
                positive_usize("dim", c.dim)?;
                c.function.require_order("order", c.order + 3, &format!("order = {}", c.order))?;
                positive("h_norm", c.h_norm)?;
                positive("v_norm", c.v_norm)?;
                positive_grid("scales", &c.scales, 4)?;
                positive("slope_tolerance", c.slope_tolerance)?;
            }
            ExperimentConfig::Combinatorial(c) => {
                positive_usize("draws", c.draws)?;
                positive_usize("dim", c.dim)?;
                positive_usize("n", c.n)?;
                c.function.require_order("order", c.n + c.order + 2, &format!("n + order = {}", c.n + c.order))?;
                if !c.scales.is_empty() {
                    positive_grid("scales", &c.scales, 4)?;
                }
                positive("tolerance", c.tolerance)?;
                positive("slope_tolerance", c.slope_tolerance)?;
            }
            ExperimentConfig::HeatTrace(c) => {
                c.model.validate("model")?;
                positive_grid("t_grid", &c.t_grid, 1)?;
                finite("s", c.s)?;
                expected_len("expected_slopes", &c.expected_slopes, c.order)?;
                orders_in_range("check_orders", &c.check_orders, c.order)?;
                positive("slope_tolerance", c.slope_tolerance)?;
            }
            ExperimentConfig::SpectralAction(c) => {
                c.model.validate("model")?;
                positive_grid("t_grid", &c.t_grid, 1)?;
                c.function.require_order("order", 2 * c.order + 3, &format!("order = {}", c.order))?;
                finite("s", c.s)?;
                expected_len("expected_slopes", &c.expected_slopes, c.order)?;
                orders_in_range("check_orders", &c.check_orders, c.order)?;
                positive("slope_tolerance", c.slope_tolerance)?;
            }
            ExperimentConfig::ThetaAsymptotic(c) => {
                positive_usize("nmax", c.nmax)?;
                positive_grid("t_grid", &c.t_grid, 3)?;
                positive("tolerance_leading", c.tolerance_leading)?;
                positive("tolerance_constant", c.tolerance_constant)?;
            }
            ExperimentConfig::Zeta(c) => {
                if c.nmax < 2 {
                    return Err(invalid("nmax", "must be at least 2"));
                }
                for (i, p) in c.points.iter().enumerate() {
                    if !(p[0] > 1.0) || !p[1].is_finite() {
                        return Err(invalid(&format!("points[{i}]"), "partial sums need Re s > 1"));
                    }
                }
                positive("tolerance_derivative", c.tolerance_derivative)?;
                positive("tolerance_sum", c.tolerance_sum)?;
            }
            ExperimentConfig::HsCalc(c) => {
                positive_usize("dim", c.dim)?;
                let n = c.extension_order.unwrap_or(5);
                positive_usize("extension_order", n)?;
                c.function.require_order("extension_order", n + 1, &format!("extension order {n}"))?;
                let q = &c.quadrature;
                if q.points < 2 || !(q.rel_tol > 0.0) || !(q.abs_tol >= 0.0) || q.max_cells == 0 {
                    return Err(invalid("quadrature", "needs points >= 2, rel_tol > 0, abs_tol >= 0 and max_cells > 0"));
                }
                positive("tolerance_apply", c.tolerance_apply)?;
                positive("tolerance_dd", c.tolerance_dd)?;
            }
            ExperimentConfig::OrderEstimate(c) => {
                if c.dims.len() < 4 || c.dims.windows(2).any(|w| w[1] <= w[0]) || c.dims[0] == 0 {
                    return Err(invalid("dims", "needs at least 4 ascending positive dimensions"));
                }
                if c.powers.is_empty() || c.powers.iter().any(|p| !p.is_finite()) {
                    return Err(invalid("powers", "needs at least one finite power"));
                }
                let g = &c.r_grid;
                if !(g.step > 0.0 && g.hi > g.lo) {
                    return Err(invalid("r_grid", "needs lo < hi and step > 0"));
                }
                finite("s_probe", c.s_probe)?;
                positive("tolerance", c.tolerance)?;
            }
        }
        Ok(())
    }
}

fn orders_in_range(field: &str, v: &Option<Vec<usize>>, order: usize) -> Result<(), ConfigError> {
    match v {
        Some(v) if v.iter().any(|k| !(1..=order).contains(k)) => Err(invalid(field, format!("orders must lie in 1..={order}"))),
        _ => Ok(()),
    }
}

fn expected_len(field: &str, v: &Option<Vec<f64>>, order: usize) -> Result<(), ConfigError> {
    match v {
        Some(v) if v.len() != order => Err(invalid(field, format!("needs one slope per order 1..={order}"))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_configs_take_defaults() {
        let c = parse(r#"{"experiment": "identities"}"#).unwrap();
        match c {
            ExperimentConfig::Identities(c) => {
                assert_eq!(c.draws, 50);
                assert_eq!(c.kinds.len(), 5);
                assert_eq!(c.tolerance, 1e-9);
            }
            _ => panic!("wrong experiment"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let e = parse(r#"{"experiment": "taylor", "ordre": 2}"#).unwrap_err();
        assert!(e.message.contains("ordre"), "{}", e.message);
        let e = parse(r#"{"experiment": "taylor", "function": {"name": "exp", "width": 1}}"#).unwrap_err();
        assert!(e.message.contains("function") && e.message.contains("width"), "{}", e.message);
        assert!(parse(r#"{"experiment": "nope"}"#).is_err());
    }

    #[test]
    fn order_preconditions_name_the_field() {
        let e = parse(r#"{"experiment": "moi", "n": 3, "function": {"name": "exp", "max_order": 4}}"#).unwrap_err();
        assert!(e.message.contains("`n`") && e.message.contains("max_order 4"), "{}", e.message);
    }

    #[test]
    fn names_round_trip() {
        for name in EXPERIMENTS {
            let text = match name {
                "heat-trace" | "spectral-action" => {
                    format!(r#"{{"experiment": "{name}", "model": {{"family": "diag-linear", "dim": 10, "v0": 0.1}}, "t_grid": [0.1]}}"#)
                }
                _ => format!(r#"{{"experiment": "{name}"}}"#),
            };
            assert_eq!(parse(&text).unwrap().name(), name);
        }
    }
}
