//! Price dynamics along simulated paths: the volatility
//! `Σ_tT = P_tT T/(T-t) cov(X_T, σX_T | ξ_t)`, the innovations Brownian
//! motion driving `dB = rB dt + Σ dW`, and ensemble summaries (mean
//! volatility, vol-of-vol, conditional skewness).

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{bond_price, posterior};
use crate::model::MarketModel;
use crate::numerics::{fmt_f64, sample_skewness};
use crate::paths::{InfoPath, PathEnsemble, TimeGrid};

/// Default width (in grid points) of the centered vol-of-vol window.
pub const DEFAULT_VOL_WINDOW: usize = 11;
/// Minimum number of paths in a conditional sub-ensemble for skewness.
pub const MIN_CONDITIONAL_PATHS: usize = 30;

/// Bond price volatility at `(t, ξ)`.
pub fn volatility(model: &MarketModel, t: f64, xi: f64) -> Result<f64> {
    let state = posterior(model, t, xi)?;
    let horizon = model.horizon();
    Ok(model.discount_to_horizon(t) * horizon / (horizon - t) * state.cond_cov)
}

/// Bond prices along one path.
pub fn price_series(path: &InfoPath, model: &MarketModel) -> Result<Vec<f64>> {
    path.times().iter().zip(&path.xi).map(|(&t, &xi)| bond_price(model, t, xi)).collect()
}

/// Volatility along one path.
pub fn volatility_series(path: &InfoPath, model: &MarketModel) -> Result<Vec<f64>> {
    path.times().iter().zip(&path.xi).map(|(&t, &xi)| volatility(model, t, xi)).collect()
}

/// Innovations process reconstructed from one information path.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationsPath {
    pub grid: TimeGrid,
    pub w: Vec<f64>,
}

/// Left-point Euler reconstruction of
/// `dW = dξ + (ξ - T E[σX_T | ξ]) / (T - t) dt`.
pub fn innovations(path: &InfoPath, model: &MarketModel) -> Result<InnovationsPath> {
    let ts = path.times();
    let horizon = model.horizon();
    let mut w = Vec::with_capacity(ts.len());
    w.push(0.0);
    for j in 0..ts.len().saturating_sub(1) {
        let state = posterior(model, ts[j], path.xi[j])?;
        let dt = ts[j + 1] - ts[j];
        let drift = (path.xi[j] - horizon * state.cond_mean_sigma_x) / (horizon - ts[j]);
        let next = w[j] + (path.xi[j + 1] - path.xi[j]) + dt * drift;
        w.push(next);
    }
    Ok(InnovationsPath { grid: path.grid.clone(), w })
}

/// Ensemble volatility summaries on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolDiagnostics {
    pub t: Vec<f64>,
    pub mean_vol: Vec<f64>,
    pub vol_of_vol: Vec<f64>,
    pub n_paths: usize,
}

impl VolDiagnostics {
    /// CSV with columns `t, mean_vol, vol_of_vol`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["t", "mean_vol", "vol_of_vol"]).map_err(io)?;
        for j in 0..self.t.len() {
            w.write_record([fmt_f64(self.t[j]), fmt_f64(self.mean_vol[j]), fmt_f64(self.vol_of_vol[j])]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Per-path volatility series evaluated in parallel, returned in path order.
pub fn ensemble_volatility_series(ensemble: &PathEnsemble, model: &MarketModel) -> Result<Vec<Vec<f64>>> {
    ensemble.paths.par_iter().map(|p| volatility_series(p, model)).collect()
}

/// Pointwise mean volatility and a rolling vol-of-vol.
///
/// `vol_of_vol[j]` is the sample standard deviation of the scaled increments
/// `(Σ_{k+1} - Σ_k) / √(t_{k+1} - t_k)` pooled over all paths and over the
/// increments lying inside the centered window of `window` grid points
/// around `j` (clipped at the grid ends). It is `NaN` when fewer than two
/// increments fall in the window.
pub fn ensemble_volatility(ensemble: &PathEnsemble, model: &MarketModel, window: usize) -> Result<VolDiagnostics> {
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("ensemble is empty".into()));
    }
    let series = ensemble_volatility_series(ensemble, model)?;
    Ok(summarize_volatility(ensemble.grid.points(), &series, window))
}

pub(crate) fn summarize_volatility(ts: &[f64], series: &[Vec<f64>], window: usize) -> VolDiagnostics {
    let len = ts.len();
    let n_paths = series.len();
    let mut mean_vol = vec![0.0; len];
    for s in series {
        for (acc, v) in mean_vol.iter_mut().zip(s) {
            *acc += v;
        }
    }
    for v in mean_vol.iter_mut() {
        *v /= n_paths as f64;
    }

    let n_inc = len.saturating_sub(1);
    let mut s1 = vec![0.0; n_inc];
    let mut s2 = vec![0.0; n_inc];
    for s in series {
        for k in 0..n_inc {
            let d = (s[k + 1] - s[k]) / (ts[k + 1] - ts[k]).sqrt();
            s1[k] += d;
            s2[k] += d * d;
        }
    }
    let half = window.max(1) / 2;
    let vol_of_vol = (0..len)
        .map(|j| {
            if n_inc == 0 {
                return f64::NAN;
            }
            let lo = j.saturating_sub(half);
            let hi = (j + half).saturating_sub(1).min(n_inc - 1);
            if lo > hi {
                return f64::NAN;
            }
            let count = ((hi - lo + 1) * n_paths) as f64;
            if count < 2.0 {
                return f64::NAN;
            }
            let sum: f64 = s1[lo..=hi].iter().sum();
            let sum_sq: f64 = s2[lo..=hi].iter().sum();
            ((sum_sq - sum * sum / count) / (count - 1.0)).max(0.0).sqrt()
        })
        .collect();
    VolDiagnostics { t: ts.to_vec(), mean_vol, vol_of_vol, n_paths }
}

/// Pointwise skewness across the series whose realized cash equals
/// `condition_cash`.
///
/// Grid points where the conditional sample has no dispersion (for
/// instance `t = 0`) yield `NaN`; if that holds at every point the sample is
/// rejected with [`Error::DegenerateSample`].
pub fn conditional_skewness(series: &[Vec<f64>], realized_cash: &[f64], condition_cash: f64) -> Result<Vec<f64>> {
    let selected: Vec<&Vec<f64>> =
        series.iter().zip(realized_cash).filter(|(_, &x)| x == condition_cash).map(|(s, _)| s).collect();
    if selected.len() < MIN_CONDITIONAL_PATHS {
        return Err(Error::TooFewPaths { found: selected.len(), required: MIN_CONDITIONAL_PATHS });
    }
    let len = selected[0].len();
    let mut column = Vec::with_capacity(selected.len());
    let skews: Vec<f64> = (0..len)
        .map(|j| {
            column.clear();
            column.extend(selected.iter().map(|s| s[j]));
            sample_skewness(&column).unwrap_or(f64::NAN)
        })
        .collect();
    if skews.iter().all(|s| s.is_nan()) {
        return Err(Error::DegenerateSample);
    }
    Ok(skews)
}

/// Skewness of bond prices across the paths that realized `condition_cash`.
pub fn skewness_process(ensemble: &PathEnsemble, model: &MarketModel, condition_cash: f64) -> Result<Vec<f64>> {
    let prices: Vec<Vec<f64>> = ensemble.paths.par_iter().map(|p| price_series(p, model)).collect::<Result<_>>()?;
    let cash: Vec<f64> = ensemble.paths.iter().map(|p| p.scenario_cash).collect();
    conditional_skewness(&prices, &cash, condition_cash)
}
