//! Market model: the discrete law of the terminal cash flow, the discrete law
//! of the information flow rate, the horizon and a flat short rate.
//!
//! Also hosts the measurability check on `(cash, flow)` pairs and the
//! aggregation of several correlated information sources into one
//! effective flow rate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;
const COLLISION_REL_TOL: f64 = 1e-12;

/// Discrete cash-flow law `{x_i, p_i}`, discrete flow-rate law `{σ_k, q_k}`,
/// horizon `T` and flat continuously compounded short rate `r`.
///
/// Construct through [`MarketModel::new`] (or deserialize), which enforces
/// the probability, ordering and horizon invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct MarketModel {
    cash_values: Vec<f64>,
    cash_probs: Vec<f64>,
    flow_values: Vec<f64>,
    flow_probs: Vec<f64>,
    horizon: f64,
    short_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawModel {
    cash_values: Vec<f64>,
    cash_probs: Vec<f64>,
    flow_values: Vec<f64>,
    flow_probs: Vec<f64>,
    horizon: f64,
    #[serde(default)]
    short_rate: f64,
}

impl TryFrom<RawModel> for MarketModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        MarketModel::new(raw.cash_values, raw.cash_probs, raw.flow_values, raw.flow_probs, raw.horizon, raw.short_rate)
    }
}

impl From<MarketModel> for RawModel {
    fn from(m: MarketModel) -> Self {
        RawModel {
            cash_values: m.cash_values,
            cash_probs: m.cash_probs,
            flow_values: m.flow_values,
            flow_probs: m.flow_probs,
            horizon: m.horizon,
            short_rate: m.short_rate,
        }
    }
}

fn check_law(name: &str, values: &[f64], probs: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidModel(format!("{name} law has no outcomes")));
    }
    if values.len() != probs.len() {
        return Err(Error::InvalidModel(format!(
            "{name} law has {} values but {} probabilities",
            values.len(),
            probs.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel(format!("{name} values must be finite")));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidModel(format!("{name} probabilities must lie in [0, 1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidModel(format!("{name} probabilities sum to {total}, not 1")));
    }
    Ok(())
}

impl MarketModel {
    pub fn new(
        cash_values: Vec<f64>,
        cash_probs: Vec<f64>,
        flow_values: Vec<f64>,
        flow_probs: Vec<f64>,
        horizon: f64,
        short_rate: f64,
    ) -> Result<Self> {
        check_law("cash", &cash_values, &cash_probs)?;
        check_law("flow", &flow_values, &flow_probs)?;
        if cash_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel("cash values must be strictly increasing".into()));
        }
        for (k, a) in flow_values.iter().enumerate() {
            if flow_values[k + 1..].contains(a) {
                return Err(Error::InvalidModel(format!("flow value {a} is repeated")));
            }
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidModel(format!("horizon must be positive, got {horizon}")));
        }
        if !short_rate.is_finite() {
            return Err(Error::InvalidModel("short rate must be finite".into()));
        }
        Ok(MarketModel { cash_values, cash_probs, flow_values, flow_probs, horizon, short_rate })
    }

    /// Constant flow rate model (the original single-σ setting).
    pub fn constant_flow(
        cash_values: Vec<f64>,
        cash_probs: Vec<f64>,
        sigma: f64,
        horizon: f64,
        short_rate: f64,
    ) -> Result<Self> {
        Self::new(cash_values, cash_probs, vec![sigma], vec![1.0], horizon, short_rate)
    }

    /// Same cash law, horizon and rate with a different flow-rate law.
    pub fn with_flow(&self, flow_values: Vec<f64>, flow_probs: Vec<f64>) -> Result<Self> {
        Self::new(
            self.cash_values.clone(),
            self.cash_probs.clone(),
            flow_values,
            flow_probs,
            self.horizon,
            self.short_rate,
        )
    }

    /// Same model with the flow rate pinned to `sigma`.
    pub fn with_constant_flow(&self, sigma: f64) -> Result<Self> {
        self.with_flow(vec![sigma], vec![1.0])
    }

    pub fn cash_values(&self) -> &[f64] {
        &self.cash_values
    }
    pub fn cash_probs(&self) -> &[f64] {
        &self.cash_probs
    }
    pub fn flow_values(&self) -> &[f64] {
        &self.flow_values
    }
    pub fn flow_probs(&self) -> &[f64] {
        &self.flow_probs
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn short_rate(&self) -> f64 {
        self.short_rate
    }

    pub fn n_cash(&self) -> usize {
        self.cash_values.len()
    }
    pub fn n_flow(&self) -> usize {
        self.flow_values.len()
    }

    pub fn min_cash(&self) -> f64 {
        self.cash_values[0]
    }
    pub fn max_cash(&self) -> f64 {
        self.cash_values[self.cash_values.len() - 1]
    }

    /// `E[X_T]` under the prior.
    pub fn mean_cash(&self) -> f64 {
        self.cash_values.iter().zip(&self.cash_probs).map(|(x, p)| x * p).sum()
    }

    /// `E[σ]` under the prior.
    pub fn mean_flow(&self) -> f64 {
        self.flow_values.iter().zip(&self.flow_probs).map(|(s, q)| s * q).sum()
    }

    /// Prior variance of the cash flow.
    pub fn cash_variance(&self) -> f64 {
        let m = self.mean_cash();
        self.cash_values.iter().zip(&self.cash_probs).map(|(x, p)| p * (x - m) * (x - m)).sum()
    }

    /// True when every flow value is strictly positive.
    pub fn all_flows_positive(&self) -> bool {
        self.flow_values.iter().all(|&s| s > 0.0)
    }

    /// Discount factor between two dates: `exp(-r (to - from))`.
    pub fn discount(&self, from_t: f64, to_t: f64) -> Result<f64> {
        if from_t > to_t {
            return Err(Error::BadInterval { from: from_t, to: to_t });
        }
        Ok((-self.short_rate * (to_t - from_t)).exp())
    }

    /// `P_{tT}` for `t <= T`.
    pub(crate) fn discount_to_horizon(&self, t: f64) -> f64 {
        (-self.short_rate * (self.horizon - t)).exp()
    }
}

/// Free-function form of [`MarketModel::discount`].
pub fn discount(model: &MarketModel, from_t: f64, to_t: f64) -> Result<f64> {
    model.discount(from_t, to_t)
}

/// One `(cash, flow)` outcome, identified by index and value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcome {
    pub cash_index: usize,
    pub flow_index: usize,
    pub cash: f64,
    pub flow: f64,
}

/// Pairs of outcomes that produce the same terminal information while
/// carrying different cash values. Such a model leaves `X_T` unidentified
/// at maturity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurabilityReport {
    pub is_measurable: bool,
    pub collisions: Vec<(Outcome, Outcome)>,
}

/// Lists every pair of outcomes `(x_i, σ_k)`, `(x_j, σ_l)` with `x_i != x_j`
/// whose products `σ_k x_i` agree to a relative tolerance of `1e-12`.
///
/// The first outcome of each reported pair has the smaller cash value.
pub fn validate_measurability(model: &MarketModel) -> MeasurabilityReport {
    let xs = model.cash_values();
    let ss = model.flow_values();
    let mut collisions = Vec::new();
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            for (k, &sk) in ss.iter().enumerate() {
                for (l, &sl) in ss.iter().enumerate() {
                    let a = sk * xs[i];
                    let b = sl * xs[j];
                    if (a - b).abs() <= COLLISION_REL_TOL * a.abs().max(b.abs()) {
                        collisions.push((
                            Outcome { cash_index: i, flow_index: k, cash: xs[i], flow: sk },
                            Outcome { cash_index: j, flow_index: l, cash: xs[j], flow: sl },
                        ));
                    }
                }
            }
        }
    }
    MeasurabilityReport { is_measurable: collisions.is_empty(), collisions }
}

/// Which algebraic form to use when collapsing several sources into one rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveRateFormula {
    /// `(Σ_i σ_i² ρ⁻¹_ii − 2 Σ_{i≠j} σ_i σ_j ρ⁻¹_ij) / det ρ`
    #[default]
    AsPrinted,
    /// `Σ_ij σ_i ρ⁻¹_ij σ_j`
    QuadraticForm,
}

/// Flow rates of several information sources and the correlation matrix of
/// their noise bridges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub source_rates: Vec<f64>,
    /// Row-major square correlation matrix.
    pub noise_correlation: Vec<Vec<f64>>,
}

impl SourceSpec {
    pub fn new(source_rates: Vec<f64>, noise_correlation: Vec<Vec<f64>>) -> Result<Self> {
        let spec = SourceSpec { source_rates, noise_correlation };
        spec.correlation_matrix()?;
        Ok(spec)
    }

    /// Validated correlation matrix: square, matching the number of sources,
    /// symmetric to 1e-12, unit diagonal and positive definite.
    fn correlation_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.source_rates.len();
        if n == 0 {
            return Err(Error::InvalidSourceSpec("no sources".into()));
        }
        if self.noise_correlation.len() != n || self.noise_correlation.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSourceSpec(format!("correlation matrix must be {n}x{n}")));
        }
        let rho = DMatrix::from_fn(n, n, |i, j| self.noise_correlation[i][j]);
        for i in 0..n {
            if (rho[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSourceSpec("correlation diagonal must be 1".into()));
            }
            for j in 0..i {
                if (rho[(i, j)] - rho[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidSourceSpec("correlation matrix is not symmetric".into()));
                }
            }
        }
        if rho.clone().cholesky().is_none() {
            return Err(Error::InvalidSourceSpec("correlation matrix is not positive definite".into()));
        }
        Ok(rho)
    }
}

/// Effective flow rate of a family of correlated sources, using the
/// default ([`EffectiveRateFormula::AsPrinted`]) form.
pub fn effective_flow_rate(spec: &SourceSpec) -> Result<f64> {
    effective_flow_rate_with(spec, EffectiveRateFormula::AsPrinted)
}

pub fn effective_flow_rate_with(spec: &SourceSpec, formula: EffectiveRateFormula) -> Result<f64> {
    let rho = spec.correlation_matrix()?;
    let rates = &spec.source_rates;
    let n = rates.len();
    if n == 1 {
        // ρ = [1]: both forms collapse to σ_1².
        return Ok(rates[0].abs());
    }
    let det = rho.determinant();
    let inv = rho
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::InvalidSourceSpec("correlation matrix is singular".into()))?;
    let squared = match formula {
        EffectiveRateFormula::AsPrinted => {
            let mut diag = 0.0;
            let mut cross = 0.0;
            for i in 0..n {
                diag += rates[i] * rates[i] * inv[(i, i)];
                for j in 0..n {
                    if i != j {
                        cross += rates[i] * rates[j] * inv[(i, j)];
                    }
                }
            }
            (diag - 2.0 * cross) / det
        }
        EffectiveRateFormula::QuadraticForm => {
            let mut q = 0.0;
            for i in 0..n {
                for j in 0..n {
                    q += rates[i] * inv[(i, j)] * rates[j];
                }
            }
            q
        }
    };
    if squared < 0.0 {
        return Err(Error::NegativeEffectiveRate(squared));
    }
    Ok(squared.sqrt())
}
