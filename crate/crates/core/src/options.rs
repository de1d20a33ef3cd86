//! European calls on the bond: the critical information level `ξ*`, the
//! closed-form price obtained under the bridge measure, a Monte Carlo
//! cross-check, the density process `Φ_t⁻¹`, and implied constant flow rates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::innovations;
use crate::error::{Error, Result};
use crate::inference::{bond_price, check_time, posterior};
use crate::model::MarketModel;
use crate::numerics::{bisect_increasing, fmt_f64, normal_cdf, Estimate};
use crate::paths::{information_path, InfoPath, TimeGrid};
use crate::rng::substream_seed;

/// Smallest ensemble accepted by [`call_price_mc`].
pub const MIN_MC_PATHS: usize = 1000;
/// Smallest ensemble accepted by [`bridge_measure_check`].
pub const MIN_MEASURE_PATHS: usize = 10_000;
/// Width below which the `ξ*` bisection stops.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;
/// Price residual required of an implied flow rate.
pub const IMPLIED_PRICE_TOLERANCE: f64 = 1e-10;
const MAX_EXPANSIONS: usize = 1100;

/// A European call with maturity `t < T` and strike `K ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub maturity: f64,
    pub strike: f64,
}

impl OptionSpec {
    pub fn new(maturity: f64, strike: f64) -> Result<Self> {
        if !(maturity > 0.0) {
            return Err(Error::InvalidArgument(format!("option maturity must be positive, got {maturity}")));
        }
        if !(strike >= 0.0) {
            return Err(Error::InvalidArgument(format!("strike must be non-negative, got {strike}")));
        }
        Ok(OptionSpec { maturity, strike })
    }

    fn check(&self, model: &MarketModel) -> Result<()> {
        OptionSpec::new(self.maturity, self.strike)?;
        check_time(model, self.maturity)
    }
}

/// `(P_tT min x, P_tT max x)`: the range of bond prices at the option maturity.
pub fn attainable_range(model: &MarketModel, t: f64) -> Result<(f64, f64)> {
    check_time(model, t)?;
    let p = model.discount_to_horizon(t);
    Ok((p * model.min_cash(), p * model.max_cash()))
}

/// The unique `ξ*` with `B_tT(ξ*) = K`.
///
/// The bracket grows geometrically (factor 2) from `ξ = 0` until it straddles
/// the strike and is then bisected to width [`CRITICAL_TOLERANCE`].
pub fn critical_information(model: &MarketModel, spec: &OptionSpec) -> Result<f64> {
    spec.check(model)?;
    if let Some(&s) = model.flow_values().iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::NonPositiveFlowRate(s));
    }
    let (low, high) = attainable_range(model, spec.maturity)?;
    let k = spec.strike;
    if !(k > low && k < high) {
        return Err(Error::StrikeOutOfRange { strike: k, low, high });
    }
    let t = spec.maturity;
    let price = |xi: f64| bond_price(model, t, xi).unwrap_or(f64::NAN);

    let (mut lo, mut hi) = (0.0, 0.0);
    let mut step = 1.0;
    if price(0.0) < k {
        loop {
            lo = hi;
            hi = step;
            if price(hi) >= k {
                break;
            }
            step *= 2.0;
            if !step.is_finite() {
                return Err(Error::NoConvergence("no upper bracket for the critical information".into()));
            }
        }
    } else {
        loop {
            hi = lo;
            lo = -step;
            if price(lo) <= k {
                break;
            }
            step *= 2.0;
            if !step.is_finite() {
                return Err(Error::NoConvergence("no lower bracket for the critical information".into()));
            }
        }
    }
    Ok(bisect_increasing(price, k, lo, hi, CRITICAL_TOLERANCE))
}

fn check_flows_positive(model: &MarketModel) -> Result<()> {
    match model.flow_values().iter().find(|&&s| !(s > 0.0)) {
        Some(&s) => Err(Error::NonPositiveFlowRate(s)),
        None => Ok(()),
    }
}

/// Closed-form call price
/// `C_0 = P_0t Σ_k Σ_i q_k p_i (P_tT x_i - K) N(√τ σ_k x_i - Z*)` with
/// `τ = tT/(T-t)` and `Z* = ξ*/√(t(T-t)/T)`.
///
/// Strikes at or below the lowest attainable bond price give the forward
/// value `P_0t (P_tT E[X_T] - K)`; strikes at or above the highest give 0.
pub fn call_price_closed(model: &MarketModel, spec: &OptionSpec) -> Result<f64> {
    spec.check(model)?;
    let (low, high) = attainable_range(model, spec.maturity)?;
    let p0t = model.discount(0.0, spec.maturity)?;
    if spec.strike <= low {
        return Ok(p0t * (model.discount_to_horizon(spec.maturity) * model.mean_cash() - spec.strike));
    }
    if spec.strike >= high {
        return Ok(0.0);
    }
    check_flows_positive(model)?;
    let xi_star = critical_information(model, spec)?;
    call_price_at_critical(model, spec, xi_star)
}

/// The closed-form sum evaluated at a given critical level. The sum is
/// separable in `k`, so the random-σ price is the `q`-weighted average of
/// the single-σ terms at the same `ξ*`.
pub fn call_price_at_critical(model: &MarketModel, spec: &OptionSpec, xi_star: f64) -> Result<f64> {
    spec.check(model)?;
    let t = spec.maturity;
    let horizon = model.horizon();
    let p0t = model.discount(0.0, t)?;
    let ptt = model.discount_to_horizon(t);
    let sqrt_tau = (t * horizon / (horizon - t)).sqrt();
    let z_star = xi_star / (t * (horizon - t) / horizon).sqrt();
    let mut total = 0.0;
    for (s, q) in model.flow_values().iter().zip(model.flow_probs()) {
        for (x, p) in model.cash_values().iter().zip(model.cash_probs()) {
            total += q * p * (ptt * x - spec.strike) * normal_cdf(sqrt_tau * s * x - z_star);
        }
    }
    Ok(p0t * total)
}

/// Closed-form put price
/// `P_0t Σ_k Σ_i q_k p_i (K - P_tT x_i) N(Z* - √τ σ_k x_i)`, the complement of
/// [`call_price_closed`] under put-call parity. Deep in-the-money calls
/// carry time values far below the rounding error of the call price; the
/// put resolves them.
pub fn put_price_closed(model: &MarketModel, spec: &OptionSpec) -> Result<f64> {
    spec.check(model)?;
    let (low, high) = attainable_range(model, spec.maturity)?;
    let p0t = model.discount(0.0, spec.maturity)?;
    if spec.strike <= low {
        return Ok(0.0);
    }
    if spec.strike >= high {
        return Ok(p0t * (spec.strike - model.discount_to_horizon(spec.maturity) * model.mean_cash()));
    }
    check_flows_positive(model)?;
    let xi_star = critical_information(model, spec)?;
    let t = spec.maturity;
    let horizon = model.horizon();
    let ptt = model.discount_to_horizon(t);
    let sqrt_tau = (t * horizon / (horizon - t)).sqrt();
    let z_star = xi_star / (t * (horizon - t) / horizon).sqrt();
    let mut total = 0.0;
    for (s, q) in model.flow_values().iter().zip(model.flow_probs()) {
        for (x, p) in model.cash_values().iter().zip(model.cash_probs()) {
            total += q * p * (spec.strike - ptt * x) * normal_cdf(z_star - sqrt_tau * s * x);
        }
    }
    Ok(p0t * total)
}

/// Call or put.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

pub fn price_closed(model: &MarketModel, spec: &OptionSpec, kind: OptionKind) -> Result<f64> {
    match kind {
        OptionKind::Call => call_price_closed(model, spec),
        OptionKind::Put => put_price_closed(model, spec),
    }
}

/// The out-of-the-money side at `spec`: puts below the forward bond price
/// `P_tT E[X_T]`, calls at or above it.
pub fn out_of_the_money_kind(model: &MarketModel, spec: &OptionSpec) -> Result<OptionKind> {
    spec.check(model)?;
    let forward = model.discount_to_horizon(spec.maturity) * model.mean_cash();
    Ok(if spec.strike < forward { OptionKind::Put } else { OptionKind::Call })
}

/// `P_0t` times the sample mean of `(B_tT - K)⁺` over simulated `ξ_t`.
pub fn call_price_mc(model: &MarketModel, spec: &OptionSpec, n_paths: usize, seed: u64) -> Result<Estimate> {
    if n_paths < MIN_MC_PATHS {
        return Err(Error::TooFewPaths { found: n_paths, required: MIN_MC_PATHS });
    }
    spec.check(model)?;
    let t = spec.maturity;
    let p0t = model.discount(0.0, t)?;
    let grid = TimeGrid::single(model.horizon(), t)?;
    let payoffs: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let path = information_path(model, &grid, substream_seed(seed, j as u64));
            let b = bond_price(model, t, path.xi[path.xi.len() - 1])?;
            Ok(p0t * (b - spec.strike).max(0.0))
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&payoffs))
}

/// `Φ_t⁻¹` along one path: exact (`1 / Σ_ik p_ikt`) and by Euler
/// integration of `d ln Φ⁻¹ = -h dW - ½ h² dt`, `h = T/(T-t) E[σX_T | ξ_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiPath {
    pub grid: TimeGrid,
    pub phi_inverse: Vec<f64>,
    pub phi_inverse_euler: Vec<f64>,
}

pub fn phi_inverse_path(path: &InfoPath, model: &MarketModel) -> Result<PhiPath> {
    let ts = path.times();
    let horizon = model.horizon();
    let states = ts.iter().zip(&path.xi).map(|(&t, &xi)| posterior(model, t, xi)).collect::<Result<Vec<_>>>()?;
    let phi_inverse = states.iter().map(|s| s.phi_inverse()).collect();
    let w = innovations(path, model)?.w;
    let mut log_euler = 0.0;
    let mut phi_inverse_euler = Vec::with_capacity(ts.len());
    phi_inverse_euler.push(1.0);
    for j in 0..ts.len().saturating_sub(1) {
        let h = horizon / (horizon - ts[j]) * states[j].cond_mean_sigma_x;
        log_euler += -h * (w[j + 1] - w[j]) - 0.5 * h * h * (ts[j + 1] - ts[j]);
        phi_inverse_euler.push(log_euler.exp());
    }
    Ok(PhiPath { grid: path.grid.clone(), phi_inverse, phi_inverse_euler })
}

/// Moments of `ξ_t` and the cash-flow law after reweighting real-world
/// samples to the bridge measure.
///
/// Functions of `ξ_t` are weighted by `Φ_t⁻¹`. The cash value is not a
/// function of `ξ_t`, so its law is weighted by the scenario likelihood
/// ratio `exp(-T/(T-t) (σ x ξ_t - ½ σ² x² t))`, whose conditional
/// expectation given `ξ_t` is `Φ_t⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeMeasureReport {
    pub t: f64,
    pub n_paths: usize,
    /// Reweighted mean of `ξ_t`; 0 under the bridge measure.
    pub mean: Estimate,
    /// Reweighted second moment of `ξ_t`; `t(T-t)/T` under the bridge measure.
    pub variance: Estimate,
    pub expected_variance: f64,
    /// Reweighted frequency of each cash value; `p_i` under the bridge measure.
    pub cash_frequencies: Vec<Estimate>,
    /// Whether every check holds within four standard errors.
    pub passed: bool,
}

pub fn bridge_measure_check(model: &MarketModel, t: f64, n_paths: usize, seed: u64) -> Result<BridgeMeasureReport> {
    if n_paths < MIN_MEASURE_PATHS {
        return Err(Error::TooFewPaths { found: n_paths, required: MIN_MEASURE_PATHS });
    }
    check_time(model, t)?;
    let grid = TimeGrid::single(model.horizon(), t)?;
    let scale = model.horizon() / (model.horizon() - t);
    let draws: Vec<(f64, f64, f64, f64)> = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let path = information_path(model, &grid, substream_seed(seed, j as u64));
            let xi = path.xi[path.xi.len() - 1];
            let phi_inv = posterior(model, t, xi)?.phi_inverse();
            let a = path.scenario_flow * path.scenario_cash;
            let likelihood_inv = (-scale * (a * xi - 0.5 * a * a * t)).exp();
            Ok((phi_inv, likelihood_inv, xi, path.scenario_cash))
        })
        .collect::<Result<_>>()?;
    let mean = Estimate::from_samples(&draws.iter().map(|d| d.0 * d.2).collect::<Vec<_>>());
    let variance = Estimate::from_samples(&draws.iter().map(|d| d.0 * d.2 * d.2).collect::<Vec<_>>());
    let expected_variance = t * (model.horizon() - t) / model.horizon();
    let cash_frequencies: Vec<Estimate> = model
        .cash_values()
        .iter()
        .map(|&c| {
            let v: Vec<f64> = draws.iter().map(|d| if d.3 == c { d.1 } else { 0.0 }).collect();
            Estimate::from_samples(&v)
        })
        .collect();
    let passed = mean.within(0.0, 4.0)
        && variance.within(expected_variance, 4.0)
        && cash_frequencies.iter().zip(model.cash_probs()).all(|(e, p)| e.within(*p, 4.0));
    Ok(BridgeMeasureReport { t, n_paths, mean, variance, expected_variance, cash_frequencies, passed })
}

/// Call price limits of the single-σ model as `σ → 0` and `σ → ∞`.
pub fn constant_rate_price_limits(model: &MarketModel, spec: &OptionSpec) -> Result<(f64, f64)> {
    constant_rate_price_limits_for(model, spec, OptionKind::Call)
}

pub fn constant_rate_price_limits_for(model: &MarketModel, spec: &OptionSpec, kind: OptionKind) -> Result<(f64, f64)> {
    spec.check(model)?;
    let t = spec.maturity;
    let p0t = model.discount(0.0, t)?;
    let ptt = model.discount_to_horizon(t);
    let payoff = |b: f64| match kind {
        OptionKind::Call => (b - spec.strike).max(0.0),
        OptionKind::Put => (spec.strike - b).max(0.0),
    };
    let low = p0t * payoff(ptt * model.mean_cash());
    let high = p0t * model.cash_values().iter().zip(model.cash_probs()).map(|(x, p)| p * payoff(ptt * x)).sum::<f64>();
    Ok((low, high))
}

/// The flow rate `σ > 0` at which the single-σ call price equals `target`.
///
/// `template` supplies the cash law, rate and horizon; its flow law is
/// ignored except that its mean is the starting guess. The bracket grows
/// geometrically from that guess, then the bracket in σ is bisected to
/// machine precision; the result must reprice to within
/// [`IMPLIED_PRICE_TOLERANCE`].
pub fn implied_bhm_sigma(template: &MarketModel, spec: &OptionSpec, target: f64) -> Result<f64> {
    implied_bhm_sigma_for(template, spec, target, OptionKind::Call)
}

/// [`implied_bhm_sigma`] for a call or a put price; both prices increase
/// with σ.
pub fn implied_bhm_sigma_for(template: &MarketModel, spec: &OptionSpec, target: f64, kind: OptionKind) -> Result<f64> {
    let (low, high) = constant_rate_price_limits_for(template, spec, kind)?;
    if !(target > low && target < high) {
        return Err(Error::TargetOutOfRange { target, low, high });
    }
    let init = template.mean_flow();
    if !(init > 0.0) {
        return Err(Error::InvalidArgument(format!("initial flow rate must be positive, got {init}")));
    }
    let price_at = |sigma: f64| -> Result<f64> { price_closed(&template.with_constant_flow(sigma)?, spec, kind) };

    let (mut lo, mut hi) = (init, init);
    if price_at(init)? < target {
        let mut n = 0;
        while price_at(hi)? < target {
            lo = hi;
            hi *= 2.0;
            n += 1;
            if n > MAX_EXPANSIONS || !hi.is_finite() {
                return Err(Error::NoConvergence(format!("no upper flow-rate bracket for price {target}")));
            }
        }
    } else {
        let mut n = 0;
        while price_at(lo)? > target {
            hi = lo;
            lo *= 0.5;
            n += 1;
            if n > MAX_EXPANSIONS || lo == 0.0 {
                return Err(Error::NoConvergence(format!("no lower flow-rate bracket for price {target}")));
            }
        }
    }
    let sigma = bisect_increasing(|s| price_at(s).unwrap_or(f64::NAN), target, lo, hi, 0.0);
    let residual = (price_at(sigma)? - target).abs();
    if residual > IMPLIED_PRICE_TOLERANCE * target.max(1.0) {
        return Err(Error::NoConvergence(format!("implied flow rate {sigma} reprices with residual {residual}")));
    }
    Ok(sigma)
}

/// Call prices and implied constant flow rates on a maturity × strike grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolSurface {
    pub strikes: Vec<f64>,
    pub maturities: Vec<f64>,
    /// Indexed `[maturity][strike]`.
    pub prices: Vec<Vec<f64>>,
    /// `NaN` where calibration failed.
    pub implied_sigma: Vec<Vec<f64>>,
    pub converged: Vec<Vec<bool>>,
}

impl VolSurface {
    /// CSV with columns `maturity, strike, price, implied_sigma, converged`,
    /// ordered by maturity then strike.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["maturity", "strike", "price", "implied_sigma", "converged"]).map_err(io)?;
        for (a, t) in self.maturities.iter().enumerate() {
            for (b, k) in self.strikes.iter().enumerate() {
                w.write_record([
                    fmt_f64(*t),
                    fmt_f64(*k),
                    fmt_f64(self.prices[a][b]),
                    fmt_f64(self.implied_sigma[a][b]),
                    self.converged[a][b].to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// Spread of the converged implied flow rates.
    pub fn implied_range(&self) -> f64 {
        let vals = self.implied_sigma.iter().flatten().zip(self.converged.iter().flatten()).filter(|(_, c)| **c);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (v, _)| (l.min(*v), h.max(*v)));
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }
}

/// Prices every node with [`call_price_closed`] and calibrates the
/// out-of-the-money option at that node with [`implied_bhm_sigma_for`];
/// by parity this is the same flow rate the call would imply. Nodes are
/// independent and evaluated in parallel. Nodes that fail to price or
/// calibrate are flagged, not interpolated.
pub fn vol_surface(
    model: &MarketModel,
    strikes: &[f64],
    maturities: &[f64],
    template: &MarketModel,
) -> Result<VolSurface> {
    for &t in maturities {
        OptionSpec::new(t, 0.0)?.check(model)?;
    }
    let nodes: Vec<(usize, usize)> =
        (0..maturities.len()).flat_map(|a| (0..strikes.len()).map(move |b| (a, b))).collect();
    let results: Vec<(f64, Option<f64>)> = nodes
        .par_iter()
        .map(|&(a, b)| {
            let spec = OptionSpec { maturity: maturities[a], strike: strikes[b] };
            let calibrate = || -> Result<(f64, Option<f64>)> {
                let price = call_price_closed(model, &spec)?;
                let kind = out_of_the_money_kind(model, &spec)?;
                let target = price_closed(model, &spec, kind)?;
                Ok((price, implied_bhm_sigma_for(template, &spec, target, kind).ok()))
            };
            calibrate().unwrap_or((f64::NAN, None))
        })
        .collect();
    let mut prices = vec![vec![0.0; strikes.len()]; maturities.len()];
    let mut implied_sigma = prices.clone();
    let mut converged = vec![vec![false; strikes.len()]; maturities.len()];
    for (&(a, b), (price, sigma)) in nodes.iter().zip(results) {
        prices[a][b] = price;
        implied_sigma[a][b] = sigma.unwrap_or(f64::NAN);
        converged[a][b] = sigma.is_some();
    }
    Ok(VolSurface { strikes: strikes.to_vec(), maturities: maturities.to_vec(), prices, implied_sigma, converged })
}
