//! Exact simulation of the market information process
//! `ξ_t = σ X_T t + β_tT` on a time grid.
//!
//! Bridge values are drawn from the forward conditional law of a Brownian
//! bridge pinned at zero on `[0, T]`, so grids never need to reach `T`.
//! Seeds are turned into generators by [`crate::rng`]; see that module for
//! the stream-derivation contract.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::numerics::fmt_f64;
use crate::rng::{stream_rng, substream_seed, BRIDGE_STREAM, SCENARIO_STREAM};

/// Default fraction of the horizon excluded at the end of every grid.
pub const DEFAULT_TERMINAL_CUTOFF: f64 = 0.004;
/// Default number of uniform steps.
pub const DEFAULT_STEPS: usize = 500;

/// Strictly increasing sample times starting at 0 and stopping at or before
/// `(1 - cutoff) T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    horizon: f64,
    cutoff: f64,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>, horizon: f64, cutoff: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
        }
        if !(0.0..1.0).contains(&cutoff) {
            return Err(Error::InvalidGrid(format!("terminal cutoff must lie in [0, 1), got {cutoff}")));
        }
        match points.first() {
            Some(&p) if p == 0.0 => {}
            _ => return Err(Error::InvalidGrid("grid must start at t = 0".into())),
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("grid points must be strictly increasing".into()));
        }
        let last = points[points.len() - 1];
        if last > (1.0 - cutoff) * horizon || last >= horizon {
            return Err(Error::InvalidGrid(format!(
                "last grid point {last} exceeds the retained window (1 - {cutoff}) * {horizon}"
            )));
        }
        Ok(TimeGrid { points, horizon, cutoff })
    }

    /// `steps + 1` equally spaced points on `[0, (1 - cutoff) T]`.
    pub fn uniform(horizon: f64, steps: usize, cutoff: f64) -> Result<Self> {
        if steps == 0 {
            return Self::new(vec![0.0], horizon, cutoff);
        }
        let t_max = (1.0 - cutoff) * horizon;
        let mut points: Vec<f64> = (0..=steps).map(|j| t_max * j as f64 / steps as f64).collect();
        points[steps] = t_max;
        Self::new(points, horizon, cutoff)
    }

    /// The default 500-step grid stopping at `0.996 T`.
    pub fn default_for(horizon: f64) -> Result<Self> {
        Self::uniform(horizon, DEFAULT_STEPS, DEFAULT_TERMINAL_CUTOFF)
    }

    /// Two-point grid `{0, t}` for sampling a single marginal time.
    pub fn single(horizon: f64, t: f64) -> Result<Self> {
        if t == 0.0 {
            return Self::new(vec![0.0], horizon, 0.0);
        }
        Self::new(vec![0.0, t], horizon, 0.0)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One realized scenario and the information observed along a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoPath {
    pub scenario_cash: f64,
    pub scenario_flow: f64,
    pub grid: TimeGrid,
    pub xi: Vec<f64>,
    pub bridge: Vec<f64>,
    pub seed: u64,
}

impl InfoPath {
    pub fn times(&self) -> &[f64] {
        self.grid.points()
    }
}

/// A set of paths sharing one grid; path `j` was generated from
/// `substream_seed(master_seed, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub master_seed: u64,
    pub paths: Vec<InfoPath>,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.paths.len()
    }
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// CSV with columns `path_id, t, xi, bridge, scenario_cash, scenario_flow`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["path_id", "t", "xi", "bridge", "scenario_cash", "scenario_flow"]).map_err(io)?;
        for (id, p) in self.paths.iter().enumerate() {
            for (j, t) in p.times().iter().enumerate() {
                w.write_record([
                    id.to_string(),
                    fmt_f64(*t),
                    fmt_f64(p.xi[j]),
                    fmt_f64(p.bridge[j]),
                    fmt_f64(p.scenario_cash),
                    fmt_f64(p.scenario_flow),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))?;
        Ok(())
    }
}

pub(crate) fn bridge_with_rng<R: Rng>(horizon: f64, grid: &TimeGrid, rng: &mut R) -> Vec<f64> {
    let pts = grid.points();
    let mut out = Vec::with_capacity(pts.len());
    out.push(0.0);
    for w in pts.windows(2) {
        let (s, t) = (w[0], w[1]);
        let prev = out[out.len() - 1];
        let mean = prev * (horizon - t) / (horizon - s);
        let var = (t - s) * (horizon - t) / (horizon - s);
        let z: f64 = rng.sample(StandardNormal);
        out.push(mean + var.sqrt() * z);
    }
    out
}

/// Brownian bridge on `[0, T]` sampled exactly at the grid points.
pub fn sample_bridge(horizon: f64, grid: &TimeGrid, seed: u64) -> Vec<f64> {
    bridge_with_rng(horizon, grid, &mut stream_rng(seed, BRIDGE_STREAM))
}

fn draw_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    if probs.len() == 1 {
        return 0;
    }
    // Probabilities are validated by MarketModel, so the weights are usable.
    let dist = WeightedIndex::new(probs).expect("validated probability vector");
    dist.sample(rng)
}

pub(crate) fn scenario_with_rng<R: Rng>(model: &MarketModel, rng: &mut R) -> (f64, f64) {
    let i = draw_index(model.cash_probs(), rng);
    let k = draw_index(model.flow_probs(), rng);
    (model.cash_values()[i], model.flow_values()[k])
}

/// Independent draw of the terminal cash flow and the flow rate.
pub fn sample_scenario(model: &MarketModel, seed: u64) -> (f64, f64) {
    scenario_with_rng(model, &mut stream_rng(seed, SCENARIO_STREAM))
}

/// Scenario and bridge from separate streams of `seed`, combined into
/// `ξ_t = σ x t + β_t`.
pub fn information_path(model: &MarketModel, grid: &TimeGrid, seed: u64) -> InfoPath {
    let (cash, flow) = sample_scenario(model, seed);
    let bridge = sample_bridge(grid.horizon(), grid, seed);
    let xi = grid.points().iter().zip(&bridge).map(|(t, b)| flow * cash * t + b).collect();
    InfoPath { scenario_cash: cash, scenario_flow: flow, grid: grid.clone(), xi, bridge, seed }
}

/// `n_paths` information paths generated in parallel; the result does not
/// depend on the size of the rayon pool.
pub fn make_ensemble(model: &MarketModel, grid: &TimeGrid, n_paths: usize, master_seed: u64) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::InvalidArgument("an ensemble needs at least one path".into()));
    }
    check_grid_horizon(model, grid)?;
    let paths = (0..n_paths)
        .into_par_iter()
        .map(|j| information_path(model, grid, substream_seed(master_seed, j as u64)))
        .collect();
    Ok(PathEnsemble { grid: grid.clone(), master_seed, paths })
}

pub(crate) fn check_grid_horizon(model: &MarketModel, grid: &TimeGrid) -> Result<()> {
    if grid.horizon() != model.horizon() {
        return Err(Error::InvalidGrid(format!(
            "grid horizon {} differs from model horizon {}",
            grid.horizon(),
            model.horizon()
        )));
    }
    Ok(())
}
