//! Experiment configuration files.
//!
//! A config is a JSON object with a `kind` tag, a `seed` and kind-specific
//! parameters; unknown keys are rejected. Every kind accepts an optional
//! `output` object with `report` (JSON) and `csv` paths.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Output {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantKind {
    Plain,
    Scaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberKind {
    Interval,
    Circle,
}

/// Boundary subspace of `ℂ^r`: everything, nothing, or a seeded random
/// subspace of the given dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub enum Subspace {
    Full,
    None,
    Random { dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BoundaryConfig {
    pub rank: usize,
    pub v1: Subspace,
    pub v2: Subspace,
}

fn d_cases_200() -> usize {
    200
}
fn d_cases_100() -> usize {
    100
}
fn d_cases_50() -> usize {
    50
}
fn d_total_dim() -> usize {
    24
}
fn d_lap_cond() -> f64 {
    1e6
}
fn d_tol_oracle() -> f64 {
    1e-6
}
fn d_tol_model() -> f64 {
    1e-7
}
fn d_one() -> usize {
    1
}
fn d_two() -> usize {
    2
}
fn d_three() -> usize {
    3
}
fn d_metric_cond() -> f64 {
    10.0
}
fn d_variant() -> VariantKind {
    VariantKind::Plain
}
fn d_r_model() -> Vec<f64> {
    vec![4.0, 8.0, 16.0]
}
fn d_kappa() -> f64 {
    0.3
}
fn d_r_filtration() -> f64 {
    8.0
}
fn d_true() -> bool {
    true
}
fn d_grids() -> Vec<usize> {
    vec![16, 32, 64]
}
fn d_amplitude() -> f64 {
    0.3
}
fn d_min_order() -> f64 {
    1.9
}
fn d_t_list() -> Vec<f64> {
    vec![6.0, 8.0, 10.0, 12.0]
}
fn d_cells_per_t() -> usize {
    50
}
fn d_decay_slope() -> f64 {
    -1.0
}
fn d_slope_tol() -> f64 {
    0.1
}
fn d_alpha_ratio() -> f64 {
    2.0
}
fn d_fiber() -> FiberKind {
    FiberKind::Interval
}
fn d_theta() -> f64 {
    2.0
}
fn d_r_glued() -> Vec<f64> {
    vec![8.0, 16.0, 24.0, 32.0, 40.0]
}
fn d_cells_per_unit() -> usize {
    200
}
fn d_onset_slope() -> f64 {
    0.5
}
fn d_exponent_tol() -> f64 {
    0.15
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TorsionOracleConfig {
    pub seed: u64,
    #[serde(default = "d_cases_200")]
    pub cases: usize,
    #[serde(default = "d_total_dim")]
    pub max_total_dim: usize,
    /// Largest accepted `max λ / min λ` over the nonzero spectrum of `Δ`.
    #[serde(default = "d_lap_cond")]
    pub max_laplacian_cond: f64,
    #[serde(default = "d_tol_oracle")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: Output,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GluingModelConfig {
    pub seed: u64,
    #[serde(default = "d_cases_100")]
    pub cases: usize,
    #[serde(default = "d_one")]
    pub strata: usize,
    #[serde(default = "d_three")]
    pub max_dim: usize,
    #[serde(default = "d_metric_cond")]
    pub metric_cond: f64,
    #[serde(default = "d_variant")]
    pub variant: VariantKind,
    /// Swept for the scaled variant; ignored for the plain one.
    #[serde(default = "d_r_model")]
    pub r_list: Vec<f64>,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    #[serde(default = "d_tol_model")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: Output,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MvFiltrationConfig {
    pub seed: u64,
    #[serde(default = "d_cases_50")]
    pub cases: usize,
    #[serde(default = "d_two")]
    pub strata: usize,
    #[serde(default = "d_three")]
    pub max_dim: usize,
    #[serde(default = "d_metric_cond")]
    pub metric_cond: f64,
    #[serde(default = "d_r_filtration")]
    pub r: f64,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    /// Draw every case so that `V₁ + V₂ ≠ V` in at least one stratum.
    #[serde(default = "d_true")]
    pub require_quotient: bool,
    #[serde(default = "d_tol_model")]
    pub tolerance: f64,
    #[serde(default)]
    pub output: Output,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TransgressionConfig {
    pub seed: u64,
    #[serde(default = "d_grids")]
    pub grids: Vec<usize>,
    /// `u(x) = amplitude · sin 2πx` in the line-bundle metric `e^{2u}`.
    #[serde(default = "d_amplitude")]
    pub amplitude: f64,
    #[serde(default = "d_min_order")]
    pub min_order: f64,
    #[serde(default)]
    pub output: Output,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WittenIntervalConfig {
    pub seed: u64,
    #[serde(default = "d_t_list")]
    pub t_list: Vec<f64>,
    #[serde(default = "d_cells_per_t")]
    pub cells_per_t: usize,
    /// Defaults to twelve configurations with `r ≤ 3`.
    #[serde(default)]
    pub configs: Option<Vec<BoundaryConfig>>,
    #[serde(default = "d_decay_slope")]
    pub decay_slope: f64,
    #[serde(default = "d_slope_tol")]
    pub slope_tolerance: f64,
    #[serde(default = "d_alpha_ratio")]
    pub max_alpha_ratio: f64,
    #[serde(default)]
    pub output: Output,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GluedFiberConfig {
    pub seed: u64,
    #[serde(default = "d_fiber")]
    pub topology: FiberKind,
    /// Holonomy angle of the circle fibre.
    #[serde(default = "d_theta")]
    pub theta: f64,
    #[serde(default = "d_one")]
    pub rank: usize,
    #[serde(default = "d_r_glued")]
    pub r_list: Vec<f64>,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    #[serde(default = "d_cells_per_unit")]
    pub cells_per_unit: usize,
    #[serde(default = "d_onset_slope")]
    pub onset_slope: f64,
    #[serde(default = "d_slope_tol")]
    pub onset_tolerance: f64,
    /// Also compare the small-eigenvalue complex with the model (interval only).
    #[serde(default)]
    pub small_complex: bool,
    #[serde(default = "d_exponent_tol")]
    pub exponent_tolerance: f64,
    #[serde(default)]
    pub output: Output,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    GluingModel(GluingModelConfig),
    Transgression(TransgressionConfig),
    WittenInterval(WittenIntervalConfig),
    GluedFiber(GluedFiberConfig),
    MvFiltration(MvFiltrationConfig),
    TorsionOracle(TorsionOracleConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::GluingModel(_) => "gluing-model",
            Self::Transgression(_) => "transgression",
            Self::WittenInterval(_) => "witten-interval",
            Self::GluedFiber(_) => "glued-fiber",
            Self::MvFiltration(_) => "mv-filtration",
            Self::TorsionOracle(_) => "torsion-oracle",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::GluingModel(c) => c.seed,
            Self::Transgression(c) => c.seed,
            Self::WittenInterval(c) => c.seed,
            Self::GluedFiber(c) => c.seed,
            Self::MvFiltration(c) => c.seed,
            Self::TorsionOracle(c) => c.seed,
        }
    }

    pub fn output(&self) -> &Output {
        match self {
            Self::GluingModel(c) => &c.output,
            Self::Transgression(c) => &c.output,
            Self::WittenInterval(c) => &c.output,
            Self::GluedFiber(c) => &c.output,
            Self::MvFiltration(c) => &c.output,
            Self::TorsionOracle(c) => &c.output,
        }
    }

    /// Name and length of the swept parameter, if the kind has one.
    pub fn swept(&self) -> Option<(&'static str, usize)> {
        match self {
            Self::GluingModel(c) if c.variant == VariantKind::Scaled => Some(("rList", c.r_list.len())),
            Self::Transgression(c) => Some(("grids", c.grids.len())),
            Self::WittenInterval(c) => Some(("tList", c.t_list.len())),
            Self::GluedFiber(c) => Some(("rList", c.r_list.len())),
            _ => None,
        }
    }

    /// SHA-256 of the canonical serialization (defaults filled in).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Semantic checks beyond the schema; returns every problem found.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                errs.push(msg.to_string());
            }
        };
        let kappa_ok = |k: f64| k > 0.0 && k < 1.0 / 3.0;
        let positive = |xs: &[f64]| xs.iter().all(|&x| x.is_finite() && x > 0.0);
        match self {
            Self::TorsionOracle(c) => {
                need(c.cases >= 1, "cases must be at least 1");
                need((2..=64).contains(&c.max_total_dim), "maxTotalDim must lie in 2..=64");
                need(c.max_laplacian_cond > 1.0, "maxLaplacianCond must exceed 1");
                need(c.tolerance > 0.0, "tolerance must be positive");
            }
            Self::GluingModel(c) => {
                need(c.cases >= 1, "cases must be at least 1");
                need((1..=3).contains(&c.strata), "strata must lie in 1..=3");
                need((1..=6).contains(&c.max_dim), "maxDim must lie in 1..=6");
                need(c.metric_cond >= 1.0, "metricCond must be at least 1");
                need(!c.r_list.is_empty(), "rList must not be empty");
                need(positive(&c.r_list), "rList entries must be positive");
                need(kappa_ok(c.kappa), "kappa must lie in (0, 1/3)");
                need(c.tolerance > 0.0, "tolerance must be positive");
            }
            Self::MvFiltration(c) => {
                need(c.cases >= 1, "cases must be at least 1");
                need((1..=3).contains(&c.strata), "strata must lie in 1..=3");
                need((2..=6).contains(&c.max_dim), "maxDim must lie in 2..=6");
                need(c.metric_cond >= 1.0, "metricCond must be at least 1");
                need(c.r.is_finite() && c.r > 0.0, "r must be positive");
                need(kappa_ok(c.kappa), "kappa must lie in (0, 1/3)");
                need(c.tolerance > 0.0, "tolerance must be positive");
            }
            Self::Transgression(c) => {
                need(c.grids.len() >= 3, "grids needs at least three entries");
                need(c.grids.iter().all(|&g| g >= 3), "grid sizes must be at least 3");
                need(c.amplitude.is_finite() && c.amplitude.abs() < 5.0, "amplitude must be finite and below 5");
            }
            Self::WittenInterval(c) => {
                need(!c.t_list.is_empty(), "tList must not be empty");
                need(positive(&c.t_list), "tList entries must be positive");
                need(c.cells_per_t >= 50, "cellsPerT must be at least 50");
                if let Some(cfgs) = &c.configs {
                    need(!cfgs.is_empty(), "configs must not be empty");
                    for b in cfgs {
                        need((1..=3).contains(&b.rank), "boundary config rank must lie in 1..=3");
                        for v in [&b.v1, &b.v2] {
                            if let Subspace::Random { dim } = v {
                                need(*dim <= b.rank, "random subspace dimension exceeds rank");
                            }
                        }
                    }
                }
                need(c.slope_tolerance > 0.0 && c.max_alpha_ratio > 1.0, "tolerances must be positive");
            }
            Self::GluedFiber(c) => {
                need(!c.r_list.is_empty(), "rList must not be empty");
                need(positive(&c.r_list), "rList entries must be positive");
                need(kappa_ok(c.kappa), "kappa must lie in (0, 1/3)");
                need(c.rank >= 1 && c.rank <= 3, "rank must lie in 1..=3");
                need(c.cells_per_unit >= 10, "cellsPerUnit must be at least 10");
                need(
                    !(c.small_complex && c.topology == FiberKind::Circle),
                    "smallComplex is only available for the interval fibre",
                );
                need(c.onset_tolerance > 0.0 && c.exponent_tolerance > 0.0, "tolerances must be positive");
            }
        }
        errs
    }
}

/// Parses and validates a config; the error lists every diagnostic.
pub fn parse(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| vec![e.to_string()])?;
    let errs = cfg.validate();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(errs)
    }
}
