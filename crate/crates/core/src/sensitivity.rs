//! Fisher information of the constant-σ posterior with respect to σ, its
//! conditional-variance representation, Monte Carlo expectation, and the
//! Rao divergence `D_t(σ, σ') = ∫ √g_t(u) du`.
//!
//! Every function here treats `model` as a cash-flow law only: its flow
//! law is replaced by a point mass at the `sigma` argument.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::check_time;
use crate::model::MarketModel;
use crate::numerics::{fmt_f64, integrate, ln_prob, log_sum_exp, Estimate};
use crate::paths::{information_path, TimeGrid};
use crate::rng::substream_seed;

/// Smallest ensemble accepted by [`expected_fisher`].
pub const MIN_FISHER_PATHS: usize = 100;
/// Absolute tolerance of the Rao divergence quadrature.
pub const RAO_TOLERANCE: f64 = 1e-8;
const RAO_MAX_SUBDIVISIONS: usize = 500;

/// Prefactor multiplying `(T/(T-t))² var(X_T β_tT | ξ_t)` in the
/// variance form of the Fisher information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariancePrefactor {
    /// `σt`, as the identity is usually written.
    #[default]
    SigmaT,
    /// `1`; this is the factor for which the identity with the direct sum
    /// holds exactly.
    Unit,
}

/// Constant-σ posterior `π_it(σ)` and the scores `a_i = x_i (ξ - σ x_i t)`.
fn posterior_and_scores(model: &MarketModel, sigma: f64, t: f64, xi: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_time(model, t)?;
    let xs = model.cash_values();
    let scores: Vec<f64> = xs.iter().map(|x| x * (xi - sigma * x * t)).collect();
    if t == 0.0 {
        return Ok((model.cash_probs().to_vec(), vec![0.0; xs.len()]));
    }
    let scale = model.horizon() / (model.horizon() - t);
    let log_w: Vec<f64> = xs
        .iter()
        .zip(model.cash_probs())
        .map(|(x, p)| ln_prob(*p) + scale * (sigma * x * xi - 0.5 * sigma * sigma * x * x * t))
        .collect();
    let norm = log_sum_exp(&log_w);
    let pi = log_w.iter().map(|w| (w - norm).exp()).collect();
    Ok((pi, scores))
}

/// `∂π_it/∂σ = T/(T-t) π_it (a_i - Σ_j π_jt a_j)`.
pub fn dpi_dsigma(model: &MarketModel, sigma: f64, t: f64, xi: f64) -> Result<Vec<f64>> {
    let (pi, a) = posterior_and_scores(model, sigma, t, xi)?;
    if t == 0.0 {
        return Ok(vec![0.0; pi.len()]);
    }
    let scale = model.horizon() / (model.horizon() - t);
    let mean: f64 = pi.iter().zip(&a).map(|(p, a)| p * a).sum();
    Ok(pi.iter().zip(&a).map(|(p, a)| scale * p * (a - mean)).collect())
}

/// Constant-σ posterior `π_it(σ)`.
pub fn constant_sigma_posterior(model: &MarketModel, sigma: f64, t: f64, xi: f64) -> Result<Vec<f64>> {
    Ok(posterior_and_scores(model, sigma, t, xi)?.0)
}

/// `g_t(σ) = Σ_i (∂π_it/∂σ)² / π_it`, skipping outcomes with `π_it = 0`.
pub fn fisher_direct(model: &MarketModel, sigma: f64, t: f64, xi: f64) -> Result<f64> {
    let pi = constant_sigma_posterior(model, sigma, t, xi)?;
    let d = dpi_dsigma(model, sigma, t, xi)?;
    Ok(pi.iter().zip(&d).filter(|(p, _)| **p > 0.0).map(|(p, d)| d * d / p).sum())
}

/// `σt (T/(T-t))² var(X_T β_tT | ξ_t)` with `β = ξ - σ x_i t` per outcome.
pub fn fisher_variance_form(model: &MarketModel, sigma: f64, t: f64, xi: f64) -> Result<f64> {
    fisher_variance_form_with(model, sigma, t, xi, VariancePrefactor::SigmaT)
}

pub fn fisher_variance_form_with(
    model: &MarketModel,
    sigma: f64,
    t: f64,
    xi: f64,
    prefactor: VariancePrefactor,
) -> Result<f64> {
    let (pi, a) = posterior_and_scores(model, sigma, t, xi)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let mean: f64 = pi.iter().zip(&a).map(|(p, a)| p * a).sum();
    let var: f64 = pi.iter().zip(&a).map(|(p, a)| p * (a - mean) * (a - mean)).sum();
    let scale = model.horizon() / (model.horizon() - t);
    let factor = match prefactor {
        VariancePrefactor::SigmaT => sigma * t,
        VariancePrefactor::Unit => 1.0,
    };
    Ok(factor * scale * scale * var)
}

/// Monte Carlo mean of `g_t(σ)` over information paths generated at flow
/// rate `σ`.
///
/// Path `j` uses `substream_seed(seed, j)` whatever `σ` is, so estimates at
/// different `σ` share scenarios and bridges.
pub fn expected_fisher(model: &MarketModel, sigma: f64, t: f64, n_paths: usize, seed: u64) -> Result<Estimate> {
    if n_paths < MIN_FISHER_PATHS {
        return Err(Error::TooFewPaths { found: n_paths, required: MIN_FISHER_PATHS });
    }
    check_time(model, t)?;
    let samples = fisher_samples(model, sigma, t, n_paths, seed)?;
    Ok(Estimate::from_samples(&samples))
}

/// Per-path values of `g_t(σ)` behind [`expected_fisher`].
pub fn fisher_samples(model: &MarketModel, sigma: f64, t: f64, n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    let m = model.with_constant_flow(sigma)?;
    let grid = TimeGrid::single(model.horizon(), t)?;
    (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let path = information_path(&m, &grid, substream_seed(seed, j as u64));
            let xi = path.xi[path.xi.len() - 1];
            fisher_direct(&m, sigma, t, xi)
        })
        .collect()
}

/// `E[g_t(σ)]` over a `σ × t` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherCurve {
    pub sigma_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// Indexed `[sigma][t]`.
    pub expected_g: Vec<Vec<f64>>,
    pub std_err: Vec<Vec<f64>>,
    pub n_paths: usize,
}

impl FisherCurve {
    /// CSV with columns `sigma, t, expected_g, std_err`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["sigma", "t", "expected_g", "std_err"]).map_err(io)?;
        for (a, sigma) in self.sigma_grid.iter().enumerate() {
            for (b, t) in self.t_grid.iter().enumerate() {
                w.write_record([
                    fmt_f64(*sigma),
                    fmt_f64(*t),
                    fmt_f64(self.expected_g[a][b]),
                    fmt_f64(self.std_err[a][b]),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn fisher_curve(
    model: &MarketModel,
    sigmas: &[f64],
    times: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<FisherCurve> {
    let mut expected_g = Vec::with_capacity(sigmas.len());
    let mut std_err = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let row: Vec<Estimate> =
            times.iter().map(|&t| expected_fisher(model, sigma, t, n_paths, seed)).collect::<Result<_>>()?;
        expected_g.push(row.iter().map(|e| e.value).collect());
        std_err.push(row.iter().map(|e| e.std_err).collect());
    }
    Ok(FisherCurve { sigma_grid: sigmas.to_vec(), t_grid: times.to_vec(), expected_g, std_err, n_paths })
}

/// `D_t(σ_a, σ_b) = ∫_{σ_a}^{σ_b} √g_t(u) du` at fixed `(t, ξ)`, by adaptive
/// Gauss-Kronrod quadrature to [`RAO_TOLERANCE`].
pub fn rao_divergence(model: &MarketModel, sigma_a: f64, sigma_b: f64, t: f64, xi: f64) -> Result<f64> {
    check_time(model, t)?;
    if sigma_a > sigma_b {
        return Err(Error::InvalidArgument(format!("need sigma_a <= sigma_b, got {sigma_a} > {sigma_b}")));
    }
    if sigma_a == sigma_b {
        return Ok(0.0);
    }
    let integrand = |u: f64| fisher_direct(model, u, t, xi).map(|g| g.max(0.0).sqrt()).unwrap_or(f64::NAN);
    Ok(integrate(integrand, &[sigma_a, sigma_b], RAO_TOLERANCE, RAO_MAX_SUBDIVISIONS)?.value)
}
