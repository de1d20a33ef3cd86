//! Pricing under a false belief about the flow rate: every simulated
//! information path is priced twice, once with the true σ and once with a
//! believed σ, and the conditional skewness of the two price processes is
//! compared.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{conditional_skewness, price_series};
use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::numerics::fmt_f64;
use crate::paths::{make_ensemble, TimeGrid};

/// Smallest ensemble accepted by [`manipulation_report`].
pub const MIN_MANIPULATION_PATHS: usize = 1000;
/// Interior window, as fractions of the horizon, used for the sign summary.
pub const INTERIOR: (f64, f64) = (0.2, 0.8);

/// True and believed price paths driven by the same information paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePaths {
    pub grid: TimeGrid,
    pub true_sigma: f64,
    pub believed_sigma: f64,
    pub realized_cash: Vec<f64>,
    pub price_true: Vec<Vec<f64>>,
    pub price_believed: Vec<Vec<f64>>,
}

impl ConjugatePaths {
    pub fn len(&self) -> usize {
        self.price_true.len()
    }
    pub fn is_empty(&self) -> bool {
        self.price_true.is_empty()
    }

    /// CSV with columns `path_id, t, price_true, price_believed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["path_id", "t", "price_true", "price_believed"]).map_err(io)?;
        for (id, (a, b)) in self.price_true.iter().zip(&self.price_believed).enumerate() {
            for (j, t) in self.grid.points().iter().enumerate() {
                w.write_record([id.to_string(), fmt_f64(*t), fmt_f64(a[j]), fmt_f64(b[j])]).map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Simulates `ξ` under `model_true` (which must have a single flow value)
/// and prices each path under the true and the believed flow rate. The
/// cash-flow prior is shared by both beliefs.
pub fn conjugate_paths(
    model_true: &MarketModel,
    believed_flow: f64,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<ConjugatePaths> {
    if model_true.n_flow() != 1 {
        return Err(Error::InvalidModel("the true model must have a single flow rate".into()));
    }
    let believed = model_true.with_constant_flow(believed_flow)?;
    let ensemble = make_ensemble(model_true, grid, n_paths, seed)?;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = ensemble
        .paths
        .par_iter()
        .map(|p| Ok((price_series(p, model_true)?, price_series(p, &believed)?)))
        .collect::<Result<_>>()?;
    let (price_true, price_believed) = pairs.into_iter().unzip();
    Ok(ConjugatePaths {
        grid: grid.clone(),
        true_sigma: model_true.flow_values()[0],
        believed_sigma: believed_flow,
        realized_cash: ensemble.paths.iter().map(|p| p.scenario_cash).collect(),
        price_true,
        price_believed,
    })
}

/// Conditional skewness curves of both price processes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManipulationReport {
    pub condition_cash: f64,
    pub t: Vec<f64>,
    pub skew_true: Vec<f64>,
    pub skew_believed: Vec<f64>,
    /// Interior grid points where both skews are finite.
    pub interior_points: usize,
    /// Share of those points where the two skews have opposite signs.
    pub opposite_fraction: f64,
}

impl ManipulationReport {
    /// CSV with columns `t, skew_true, skew_believed`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["t", "skew_true", "skew_believed"]).map_err(io)?;
        for j in 0..self.t.len() {
            w.write_record([fmt_f64(self.t[j]), fmt_f64(self.skew_true[j]), fmt_f64(self.skew_believed[j])])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Skewness of each price process across the paths whose realized cash is
/// `condition_cash`, and the fraction of interior grid points
/// (`t ∈ [0.2T, 0.8T]`) where the two skews differ in sign.
pub fn manipulation_report(paths: &ConjugatePaths, condition_cash: f64) -> Result<ManipulationReport> {
    if paths.len() < MIN_MANIPULATION_PATHS {
        return Err(Error::TooFewPaths { found: paths.len(), required: MIN_MANIPULATION_PATHS });
    }
    let skew_true = conditional_skewness(&paths.price_true, &paths.realized_cash, condition_cash)?;
    let skew_believed = conditional_skewness(&paths.price_believed, &paths.realized_cash, condition_cash)?;
    let horizon = paths.grid.horizon();
    let (a, b) = (INTERIOR.0 * horizon, INTERIOR.1 * horizon);
    let mut interior_points = 0;
    let mut opposite = 0;
    for (j, &t) in paths.grid.points().iter().enumerate() {
        let (s, r) = (skew_true[j], skew_believed[j]);
        if t >= a && t <= b && s.is_finite() && r.is_finite() {
            interior_points += 1;
            if s * r < 0.0 {
                opposite += 1;
            }
        }
    }
    let opposite_fraction = if interior_points > 0 { opposite as f64 / interior_points as f64 } else { f64::NAN };
    Ok(ManipulationReport {
        condition_cash,
        t: paths.grid.points().to_vec(),
        skew_true,
        skew_believed,
        interior_points,
        opposite_fraction,
    })
}
