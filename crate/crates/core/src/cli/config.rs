//! JSON experiment configuration.

use serde::Deserialize;

use crate::model::{EffectiveRateFormula, MarketModel, SourceSpec};
use crate::paths::{DEFAULT_STEPS, DEFAULT_TERMINAL_CUTOFF};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Run label; every CSV is named `<experiment>_<name>.csv`.
    pub experiment: String,
    pub model: MarketModel,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub mc: McConfig,
    pub option: Option<OptionConfig>,
    pub surface: Option<SurfaceConfig>,
    pub manipulation: Option<ManipulationConfig>,
    pub volatility: Option<VolatilityConfig>,
    pub fisher: Option<FisherConfig>,
    pub mutual_info: Option<MutualInfoConfig>,
    /// Correlated information sources, reported by `validate`.
    pub sources: Option<SourceSpec>,
    /// Formula used for the effective flow rate of `sources`.
    #[serde(default)]
    pub effective_rate_formula: EffectiveRateFormula,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_cutoff")]
    pub terminal_cutoff: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { steps: DEFAULT_STEPS, terminal_cutoff: DEFAULT_TERMINAL_CUTOFF }
    }
}

fn default_steps() -> usize {
    DEFAULT_STEPS
}
fn default_cutoff() -> f64 {
    DEFAULT_TERMINAL_CUTOFF
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default)]
    pub seed: u64,
    /// How many individual paths are written to per-path CSVs; summaries
    /// always use the whole ensemble.
    #[serde(default = "default_export_paths")]
    pub export_paths: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { paths: default_paths(), seed: 0, export_paths: default_export_paths() }
    }
}

fn default_paths() -> usize {
    1000
}
fn default_export_paths() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionConfig {
    pub maturity: f64,
    pub strike: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub strikes: Vec<f64>,
    pub maturities: Vec<f64>,
    pub bhm_sigma_init: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManipulationConfig {
    pub true_sigma: f64,
    pub believed_sigma: f64,
    /// Realized cash value the skewness is conditioned on; defaults to the
    /// largest cash value.
    pub condition_cash: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolatilityConfig {
    /// Flow-rate laws to sweep; each replaces the model's `flow_probs`.
    #[serde(default)]
    pub flow_probs: Vec<Vec<f64>>,
    /// Width of the vol-of-vol window in grid points.
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherConfig {
    pub sigmas: Vec<f64>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutualInfoConfig {
    /// Evaluation times; defaults to 20 equally spaced times ending at the
    /// grid's last point.
    pub times: Option<Vec<f64>>,
    /// Flow-rate laws to sweep; each replaces the model's `flow_probs`.
    #[serde(default)]
    pub flow_probs: Vec<Vec<f64>>,
}
