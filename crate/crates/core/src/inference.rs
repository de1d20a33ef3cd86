//! Posterior law of `(X_T, σ)` given the current information `ξ_t`, and the
//! bond price it implies.
//!
//! With `p_ik(t, ξ) = p_i q_k exp[T/(T-t) (x_i σ_k ξ - ½ x_i² σ_k² t)]` the
//! joint posterior is `p_ik / Σ p_sl`. The exponent factor `T/(T-t)` grows
//! without bound near maturity (250 at the default cutoff), so all weights
//! are kept in log space and normalized by shifting with the largest one.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::numerics::ln_prob;
use crate::paths::InfoPath;

/// Default posterior mass required on the realized cash value by
/// [`terminal_limit_check`].
pub const DEFAULT_TERMINAL_DELTA: f64 = 0.05;

/// Conditional law of `(X_T, σ)` at one `(t, ξ_t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorState {
    pub t: f64,
    pub xi: f64,
    n_flow: usize,
    /// Unnormalized `ln p_ikt`, row-major with one row per cash value.
    pub joint_log_weights: Vec<f64>,
    /// `ln Σ_ik p_ikt`, so that `Φ_t = exp(log_normalizer)`.
    pub log_normalizer: f64,
    /// Normalized joint posterior, same layout as `joint_log_weights`.
    pub joint_probs: Vec<f64>,
    /// `π_it`.
    pub marginal_probs: Vec<f64>,
    /// `E[X_T | ξ_t]`.
    pub cond_mean_x: f64,
    /// `E[σ X_T | ξ_t]`.
    pub cond_mean_sigma_x: f64,
    /// `cov(X_T, σ X_T | ξ_t)`.
    pub cond_cov: f64,
}

impl PosteriorState {
    pub fn log_weight(&self, i: usize, k: usize) -> f64 {
        self.joint_log_weights[i * self.n_flow + k]
    }

    pub fn joint_prob(&self, i: usize, k: usize) -> f64 {
        self.joint_probs[i * self.n_flow + k]
    }

    /// `Φ_t⁻¹ = (Σ_ik p_ikt)⁻¹`.
    pub fn phi_inverse(&self) -> f64 {
        (-self.log_normalizer).exp()
    }
}

pub(crate) fn check_time(model: &MarketModel, t: f64) -> Result<()> {
    if t >= model.horizon() {
        return Err(Error::TimeAtOrPastHorizon { t, horizon: model.horizon() });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    Ok(())
}

/// Joint and marginal posterior with the first conditional moments.
///
/// At `t = 0` the information carries no signal: `ξ` is treated as 0 and the
/// prior product law is returned exactly.
pub fn posterior(model: &MarketModel, t: f64, xi: f64) -> Result<PosteriorState> {
    check_time(model, t)?;
    let xs = model.cash_values();
    let ss = model.flow_values();
    let (n, m) = (xs.len(), ss.len());
    let horizon = model.horizon();

    let mut log_w = Vec::with_capacity(n * m);
    let mut probs = Vec::with_capacity(n * m);
    let log_normalizer;
    let xi = if t == 0.0 { 0.0 } else { xi };

    if t == 0.0 {
        for i in 0..n {
            for k in 0..m {
                log_w.push(ln_prob(model.cash_probs()[i]) + ln_prob(model.flow_probs()[k]));
                probs.push(model.cash_probs()[i] * model.flow_probs()[k]);
            }
        }
        log_normalizer = 0.0;
    } else {
        let scale = horizon / (horizon - t);
        for i in 0..n {
            let lp = ln_prob(model.cash_probs()[i]);
            for k in 0..m {
                let a = xs[i] * ss[k];
                let expo = scale * (a * xi - 0.5 * a * a * t);
                log_w.push(lp + ln_prob(model.flow_probs()[k]) + expo);
            }
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for w in &log_w {
            let e = (w - max).exp();
            probs.push(e);
            total += e;
        }
        for p in probs.iter_mut() {
            *p /= total;
        }
        log_normalizer = max + total.ln();
    }

    let marginal_probs: Vec<f64> = if t == 0.0 {
        model.cash_probs().to_vec()
    } else {
        (0..n).map(|i| probs[i * m..(i + 1) * m].iter().sum::<f64>().min(1.0)).collect()
    };
    let cond_mean_x: f64 = marginal_probs.iter().zip(xs).map(|(p, x)| p * x).sum();
    let mut cond_mean_sigma_x = 0.0;
    for i in 0..n {
        for k in 0..m {
            cond_mean_sigma_x += probs[i * m + k] * ss[k] * xs[i];
        }
    }
    // centered form avoids cancellation in E[σX²] - E[X] E[σX]
    let mut cond_cov = 0.0;
    for i in 0..n {
        for k in 0..m {
            cond_cov += probs[i * m + k] * (xs[i] - cond_mean_x) * (ss[k] * xs[i] - cond_mean_sigma_x);
        }
    }

    Ok(PosteriorState {
        t,
        xi,
        n_flow: m,
        joint_log_weights: log_w,
        log_normalizer,
        joint_probs: probs,
        marginal_probs,
        cond_mean_x,
        cond_mean_sigma_x,
        cond_cov,
    })
}

/// `B_tT = P_tT Σ_i x_i π_it`.
pub fn bond_price(model: &MarketModel, t: f64, xi: f64) -> Result<f64> {
    let state = posterior(model, t, xi)?;
    Ok(model.discount_to_horizon(t) * state.cond_mean_x)
}

/// Shannon entropy `-Σ π ln π` of the cash-flow posterior, with `0 ln 0 = 0`.
pub fn entropy(state: &PosteriorState) -> f64 {
    entropy_of(&state.marginal_probs)
}

pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
}

/// Whether the posterior at the last grid point of `path` puts at least
/// `1 - delta` on the cash value that was actually realized.
pub fn terminal_limit_check(path: &InfoPath, model: &MarketModel, delta: f64) -> Result<bool> {
    let j = path.xi.len() - 1;
    let state = posterior(model, path.times()[j], path.xi[j])?;
    let i = model
        .cash_values()
        .iter()
        .position(|&x| x == path.scenario_cash)
        .ok_or_else(|| Error::InvalidArgument("path cash value is not in the model".into()))?;
    Ok(state.marginal_probs[i] >= 1.0 - delta)
}
