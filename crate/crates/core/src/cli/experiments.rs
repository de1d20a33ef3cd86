use std::io::Write;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::{Command, Output, RunError};
use crate::dynamics::{ensemble_volatility, price_series, summarize_volatility, volatility_series, DEFAULT_VOL_WINDOW};
use crate::error::{Error, Result};
use crate::infotheory::mutual_info_curve;
use crate::manipulation::{conjugate_paths, manipulation_report, ConjugatePaths};
use crate::model::{effective_flow_rate_with, EffectiveRateFormula, MarketModel, MeasurabilityReport};
use crate::numerics::fmt_f64;
use crate::options::{call_price_closed, call_price_mc, critical_information, vol_surface, OptionSpec};
use crate::paths::{make_ensemble, PathEnsemble, TimeGrid};
use crate::sensitivity::fisher_curve;

type CliResult<T> = std::result::Result<T, RunError>;

pub(super) fn dispatch(command: Command, cfg: &ExperimentConfig, out: &Output) -> CliResult<Vec<String>> {
    match command {
        Command::Simulate => simulate(cfg, out),
        Command::Volatility => volatility(cfg, out),
        Command::Fisher => fisher(cfg, out),
        Command::MutualInfo => mutual_info(cfg, out),
        Command::Price => price(cfg, out),
        Command::Surface => surface(cfg, out),
        Command::Manipulate => manipulate(cfg, out),
        Command::Validate => Ok(Vec::new()),
    }
}

fn grid(cfg: &ExperimentConfig) -> Result<TimeGrid> {
    TimeGrid::uniform(cfg.model.horizon(), cfg.grid.steps, cfg.grid.terminal_cutoff)
}

fn vol_window(cfg: &ExperimentConfig) -> usize {
    cfg.volatility.as_ref().and_then(|v| v.window).unwrap_or(DEFAULT_VOL_WINDOW)
}

fn missing(section: &str) -> RunError {
    RunError::Invalid(format!("config section \"{section}\" is required for this experiment"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn simulate(cfg: &ExperimentConfig, out: &Output) -> CliResult<Vec<String>> {
    let g = grid(cfg)?;
    let ensemble = make_ensemble(&cfg.model, &g, cfg.mc.paths, cfg.mc.seed)?;
    let model = &cfg.model;
    let series: Vec<(Vec<f64>, Vec<f64>)> = ensemble
        .paths
        .par_iter()
        .map(|p| Ok((price_series(p, model)?, volatility_series(p, model)?)))
        .collect::<Result<_>>()?;
    let vols: Vec<Vec<f64>> = series.iter().map(|s| s.1.clone()).collect();
    let summary = summarize_volatility(g.points(), &vols, vol_window(cfg));

    let n_export = cfg.mc.export_paths.min(ensemble.len());
    let exported =
        PathEnsemble { grid: g.clone(), master_seed: ensemble.master_seed, paths: ensemble.paths[..n_export].to_vec() };
    let mut files = vec![out.csv("paths", |f| exported.write_csv(f))?];
    files.push(out.csv("prices", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["path_id", "t", "price", "volatility"]).map_err(csv_err)?;
        for (id, (prices, vols)) in series.iter().take(n_export).enumerate() {
            for (j, t) in g.points().iter().enumerate() {
                w.write_record([id.to_string(), fmt_f64(*t), fmt_f64(prices[j]), fmt_f64(vols[j])]).map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    })?);
    files.push(out.csv("volatility", |f| summary.write_csv(f))?);
    Ok(files)
}

/// The model's flow law, or each law of a sweep applied to it.
fn sweep_models(cfg: &ExperimentConfig, flow_probs: Option<&Vec<Vec<f64>>>) -> Result<Vec<MarketModel>> {
    match flow_probs {
        Some(laws) if !laws.is_empty() => {
            laws.iter().map(|q| cfg.model.with_flow(cfg.model.flow_values().to_vec(), q.clone())).collect()
        }
        _ => Ok(vec![cfg.model.clone()]),
    }
}

fn sweep_name(base: &str, j: usize, n: usize) -> String {
    if n == 1 {
        base.to_string()
    } else {
        format!("{base}_{j}")
    }
}

fn write_sweep(out: &Output, cfg: &ExperimentConfig, models: &[MarketModel]) -> CliResult<String> {
    out.csv("sweep", |f| {
        let mut w = csv::Writer::from_writer(f);
        let mut header = vec!["sweep_id".to_string(), "mean_flow".to_string()];
        header.extend((0..cfg.model.n_flow()).map(|k| format!("q_{k}")));
        w.write_record(&header).map_err(csv_err)?;
        for (j, m) in models.iter().enumerate() {
            let mut row = vec![j.to_string(), fmt_f64(m.mean_flow())];
            row.extend(m.flow_probs().iter().map(|q| fmt_f64(*q)));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    })
}

fn volatility(cfg: &ExperimentConfig, out: &Output) -> CliResult<Vec<String>> {
    let g = grid(cfg)?;
    let models = sweep_models(cfg, cfg.volatility.as_ref().map(|v| &v.flow_probs))?;
    let mut files = Vec::new();
    for (j, m) in models.iter().enumerate() {
        let ensemble = make_ensemble(m, &g, cfg.mc.paths, cfg.mc.seed)?;
        let d = ensemble_volatility(&ensemble, m, vol_window(cfg))?;
        files.push(out.csv(&sweep_name("volatility", j, models.len()), |f| d.write_csv(f))?);
    }
    files.push(write_sweep(out, cfg, &models)?);
    Ok(files)
}

fn fisher(cfg: &ExperimentConfig, out: &Output) -> CliResult<Vec<String>> {
    let horizon = cfg.model.horizon();
    let (sigmas, times) = match cfg.fisher.as_ref() {
        Some(f) => (f.sigmas.clone(), f.times.clone()),
        None => ((1..=15).map(|j| 0.1 * j as f64).collect(), (1..20).map(|j| 0.05 * j as f64 * horizon).collect()),
    };
    let curve = fisher_curve(&cfg.model, &sigmas, &times, cfg.mc.paths, cfg.mc.seed)?;
    Ok(vec![out.csv("fisher", |f| curve.write_csv(f))?])
}

fn mutual_info(cfg: &ExperimentConfig, out: &Output) -> CliResult<Vec<String>> {
    let t_max = (1.0 - cfg.grid.terminal_cutoff) * cfg.model.horizon();
    let times: Vec<f64> = match cfg.mutual_info.as_ref().and_then(|m| m.times.clone()) {
        Some(t) => t,
        None => (1..=20).map(|j| t_max * j as f64 / 20.0).collect(),
    };
    let models = sweep_models(cfg, cfg.mutual_info.as_ref().map(|m| &m.flow_probs))?;
    let mut files = Vec::new();
    for (j, m) in models.iter().enumerate() {
        let curve = mutual_info_curve(m, &times, cfg.mc.paths, cfg.mc.seed)?;
        files.push(out.csv(&sweep_name("mutual_info", j, models.len()), |f| curve.write_csv(f))?);
    }
    if models.len() > 1 {
        files.push(write_sweep(out, cfg, &models)?);
    }
    Ok(files)
}

fn price(cfg: &ExperimentConfig, out: &Output) -> CliResult<Vec<String>> {
    let o = cfg.option.as_ref().ok_or_else(|| missing("option"))?;
    let spec = OptionSpec::new(o.maturity, o.strike)?;
    let closed = call_price_closed(&cfg.model, &spec)?;
    let mc = call_price_mc(&cfg.model, &spec, cfg.mc.paths, cfg.mc.seed)?;
    let xi_star = critical_information(&cfg.model, &spec).unwrap_or(f64::NAN);
    println!("closed form {closed:.10}, monte carlo {:.10} ± {:.10}", mc.value, mc.std_err);
    Ok(vec![out.csv("price", |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["maturity", "strike", "xi_star", "call_closed", "call_mc", "call_mc_std_err"])
            .map_err(csv_err)?;
        w.write_record([
            fmt_f64(spec.maturity),
            fmt_f64(spec.strike),
            fmt_f64(xi_star),
            fmt_f64(closed),
            fmt_f64(mc.value),
            fmt_f64(mc.std_err),
        ])
        .map_err(csv_err)?;
        w.flush().map_err(|e| Error::Io(e.to_string()))
    })?])
}

fn surface(cfg: &ExperimentConfig, out: &Output) -> CliResult<Vec<String>> {
    let s = cfg.surface.as_ref().ok_or_else(|| missing("surface"))?;
    let template = cfg.model.with_constant_flow(s.bhm_sigma_init)?;
    let surface = vol_surface(&cfg.model, &s.strikes, &s.maturities, &template)?;
    let failed = surface.converged.iter().flatten().filter(|c| !**c).count();
    if failed > 0 {
        eprintln!("warning: {failed} surface nodes did not calibrate");
    }
    Ok(vec![out.csv("surface", |f| surface.write_csv(f))?])
}

fn manipulate(cfg: &ExperimentConfig, out: &Output) -> CliResult<Vec<String>> {
    let m = cfg.manipulation.as_ref().ok_or_else(|| missing("manipulation"))?;
    let truth = cfg.model.with_constant_flow(m.true_sigma)?;
    let g = grid(cfg)?;
    let paths = conjugate_paths(&truth, m.believed_sigma, &g, cfg.mc.paths, cfg.mc.seed)?;
    let condition = m.condition_cash.unwrap_or(cfg.model.max_cash());
    let report = manipulation_report(&paths, condition)?;
    println!(
        "opposite-sign fraction on the interior: {:.4} over {} points",
        report.opposite_fraction, report.interior_points
    );
    let n_export = cfg.mc.export_paths.min(paths.len());
    let exported = ConjugatePaths {
        realized_cash: paths.realized_cash[..n_export].to_vec(),
        price_true: paths.price_true[..n_export].to_vec(),
        price_believed: paths.price_believed[..n_export].to_vec(),
        ..paths.clone()
    };
    Ok(vec![out.csv("conjugate_paths", |f| exported.write_csv(f))?, out.csv("skew", |f| report.write_csv(f))?])
}

pub(super) fn print_collisions(report: &MeasurabilityReport) {
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "measurability collisions: {}", report.collisions.len());
    for (a, b) in &report.collisions {
        let _ = writeln!(stdout, "  (x={}, sigma={}) collides with (x={}, sigma={})", a.cash, a.flow, b.cash, b.flow);
    }
}

pub(super) fn validate(cfg: &ExperimentConfig, report: &MeasurabilityReport) -> CliResult<()> {
    print_collisions(report);
    if let Some(sources) = cfg.sources.as_ref() {
        for (name, formula) in
            [("as printed", EffectiveRateFormula::AsPrinted), ("quadratic form", EffectiveRateFormula::QuadraticForm)]
        {
            let mark = if formula == cfg.effective_rate_formula { " [selected]" } else { "" };
            match effective_flow_rate_with(sources, formula) {
                Ok(r) => println!("effective flow rate ({name}){mark}: {r}"),
                Err(e) => println!("effective flow rate ({name}){mark}: {e}"),
            }
        }
    }
    if report.is_measurable {
        println!("model is measurable");
        Ok(())
    } else {
        Err(RunError::Invalid("model violates the measurability condition".into()))
    }
}
