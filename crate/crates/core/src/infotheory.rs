//! Mutual information `J(ξ_t, X_T)` between the market information and the
//! cash flow, computed by quadrature over the joint density and, as an
//! independent route, from the entropy identity `J = H_0 - E[H_t]`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{check_time, entropy, entropy_of, posterior};
use crate::model::MarketModel;
use crate::numerics::{fmt_f64, integrate, ln_normal_pdf, ln_prob, log_sum_exp, Estimate, Integral};
use crate::paths::{information_path, TimeGrid};
use crate::rng::substream_seed;

/// Absolute tolerance of the quadrature route.
pub const MI_TOLERANCE: f64 = 1e-7;
/// Smallest ensemble accepted by the entropy route.
pub const MIN_ENTROPY_PATHS: usize = 1000;
/// Half-width of the integration window in bridge standard deviations.
const WINDOW_SDS: f64 = 8.0;
const MAX_SUBDIVISIONS: usize = 5000;
const DENSITY_FLOOR: f64 = 1e-300;

fn check_open_time(model: &MarketModel, t: f64) -> Result<()> {
    check_time(model, t)?;
    if t == 0.0 {
        return Err(Error::InvalidArgument("the joint density needs t > 0".into()));
    }
    Ok(())
}

fn bridge_variance(model: &MarketModel, t: f64) -> f64 {
    t * (model.horizon() - t) / model.horizon()
}

/// `ln Σ_k q_k N(x; σ_k x_i t, t(T-t)/T)`, the log density of `ξ_t` given
/// `X_T = x_i`.
fn ln_conditional_density(model: &MarketModel, t: f64, x: f64, i: usize, var: f64) -> f64 {
    let xi_i = model.cash_values()[i];
    let terms: Vec<f64> = model
        .flow_values()
        .iter()
        .zip(model.flow_probs())
        .map(|(s, q)| ln_prob(*q) + ln_normal_pdf(x, s * xi_i * t, var))
        .collect();
    log_sum_exp(&terms)
}

/// `ρ(x, i) = Σ_k q_k p_i N(x; σ_k x_i t, t(T-t)/T)`.
pub fn joint_density(model: &MarketModel, t: f64, x: f64, i: usize) -> Result<f64> {
    check_open_time(model, t)?;
    if i >= model.n_cash() {
        return Err(Error::InvalidArgument(format!("cash index {i} out of range")));
    }
    let var = bridge_variance(model, t);
    Ok((ln_prob(model.cash_probs()[i]) + ln_conditional_density(model, t, x, i, var)).exp())
}

/// Density of `ξ_t`, `Σ_i ρ(x, i)`.
pub fn xi_density(model: &MarketModel, t: f64, x: f64) -> Result<f64> {
    (0..model.n_cash()).map(|i| joint_density(model, t, x, i)).sum()
}

/// `J = Σ_i ∫ ρ(x,i) ln(ρ(x,i) / (ρ_ξ(x) p_i)) dx` by adaptive quadrature.
///
/// The window spans eight bridge standard deviations beyond the extreme
/// mixture means and is pre-split into pieces no wider than one standard
/// deviation so that no mixture component can be stepped over.
pub fn mutual_info_quadrature(model: &MarketModel, t: f64) -> Result<Integral> {
    check_open_time(model, t)?;
    if model.n_cash() == 1 {
        return Ok(Integral { value: 0.0, abs_error: 0.0 });
    }
    let var = bridge_variance(model, t);
    let sd = var.sqrt();
    let means = model.cash_values().iter().flat_map(|x| model.flow_values().iter().map(move |s| s * x * t));
    let (lo, hi) = means.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), m| (l.min(m), h.max(m)));
    let (a, b) = (lo - WINDOW_SDS * sd, hi + WINDOW_SDS * sd);
    let pieces = ((b - a) / sd).ceil().max(1.0) as usize;
    let breakpoints: Vec<f64> = (0..=pieces).map(|j| a + (b - a) * j as f64 / pieces as f64).collect();

    let live: Vec<usize> = (0..model.n_cash()).filter(|&i| model.cash_probs()[i] > 0.0).collect();
    let integrand = |x: f64| {
        let ln_cond: Vec<f64> = live.iter().map(|&i| ln_conditional_density(model, t, x, i, var)).collect();
        let ln_joint: Vec<f64> = live.iter().zip(&ln_cond).map(|(&i, c)| model.cash_probs()[i].ln() + c).collect();
        let ln_marginal = log_sum_exp(&ln_joint);
        let mut acc = 0.0;
        for (lj, lc) in ln_joint.iter().zip(&ln_cond) {
            let rho = lj.exp();
            if rho >= DENSITY_FLOOR {
                acc += rho * (lc - ln_marginal);
            }
        }
        acc
    };
    integrate(integrand, &breakpoints, MI_TOLERANCE, MAX_SUBDIVISIONS)
}

/// Prior entropy `H_0 = -Σ p_i ln p_i`.
pub fn prior_entropy(model: &MarketModel) -> f64 {
    entropy_of(model.cash_probs())
}

/// `H_0 - E[H_t]` with `E[H_t]` estimated over `n_paths` simulated values of
/// `ξ_t`; the standard error is that of the sample mean of `H_t`.
pub fn mutual_info_entropy(model: &MarketModel, t: f64, n_paths: usize, seed: u64) -> Result<Estimate> {
    if n_paths < MIN_ENTROPY_PATHS {
        return Err(Error::TooFewPaths { found: n_paths, required: MIN_ENTROPY_PATHS });
    }
    check_time(model, t)?;
    if model.n_cash() == 1 {
        return Ok(Estimate { value: 0.0, std_err: 0.0 });
    }
    let h0 = prior_entropy(model);
    let grid = TimeGrid::single(model.horizon(), t)?;
    let ht: Vec<f64> = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let path = information_path(model, &grid, substream_seed(seed, j as u64));
            posterior(model, t, path.xi[path.xi.len() - 1]).map(|s| entropy(&s))
        })
        .collect::<Result<_>>()?;
    let e = Estimate::from_samples(&ht);
    Ok(Estimate { value: h0 - e.value, std_err: e.std_err })
}

/// Both routes evaluated on a list of times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MutualInfoCurve {
    pub t: Vec<f64>,
    pub j_quadrature: Vec<f64>,
    pub quad_error: Vec<f64>,
    pub j_entropy: Vec<f64>,
    pub std_err: Vec<f64>,
    pub prior_entropy: f64,
}

impl MutualInfoCurve {
    /// `sqrt(quad_error² + std_err²)` at each time.
    pub fn combined_error(&self) -> Vec<f64> {
        self.quad_error.iter().zip(&self.std_err).map(|(q, s)| q.hypot(*s)).collect()
    }

    /// CSV with columns `t, J_quadrature, J_entropy, std_err`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["t", "J_quadrature", "J_entropy", "std_err"]).map_err(io)?;
        for j in 0..self.t.len() {
            w.write_record([
                fmt_f64(self.t[j]),
                fmt_f64(self.j_quadrature[j]),
                fmt_f64(self.j_entropy[j]),
                fmt_f64(self.std_err[j]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Both routes at each positive time in `times` (every time uses the same
/// seed, so the entropy route shares its normal draws across times).
pub fn mutual_info_curve(model: &MarketModel, times: &[f64], n_paths: usize, seed: u64) -> Result<MutualInfoCurve> {
    let mut curve = MutualInfoCurve {
        t: times.to_vec(),
        j_quadrature: Vec::with_capacity(times.len()),
        quad_error: Vec::with_capacity(times.len()),
        j_entropy: Vec::with_capacity(times.len()),
        std_err: Vec::with_capacity(times.len()),
        prior_entropy: prior_entropy(model),
    };
    for &t in times {
        let q = mutual_info_quadrature(model, t)?;
        let e = mutual_info_entropy(model, t, n_paths, seed)?;
        curve.j_quadrature.push(q.value);
        curve.quad_error.push(q.abs_error);
        curve.j_entropy.push(e.value);
        curve.std_err.push(e.std_err);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn long_horizon() -> MarketModel {
        MarketModel::new(vec![0.0, 1.0], vec![0.2, 0.8], vec![0.5, 0.9], vec![0.5, 0.5], 5.0, 0.0).unwrap()
    }

    #[test]
    fn joint_density_normalizes() {
        let m = long_horizon();
        for &t in &[0.5, 2.5, 4.9] {
            let total =
                integrate(|x| xi_density(&m, t, x).unwrap(), &[-30.0, -5.0, 0.0, 2.0, 5.0, 30.0], 1e-11, 500).unwrap();
            assert!((total.value - 1.0).abs() < 1e-9, "t={t}: {}", total.value);
        }
    }

    #[test]
    fn xi_density_is_the_posterior_normalizer() {
        // Σ_ik p_ik(t, ξ) = ρ_ξ(ξ) / N(ξ; 0, t(T-t)/T), the density ratio
        // against the bridge law.
        let m = long_horizon();
        for &(t, xi) in &[(1.0, 0.3), (3.0, 2.0), (4.5, -0.5)] {
            let s = posterior(&m, t, xi).unwrap();
            let ratio = xi_density(&m, t, xi).unwrap() / ln_normal_pdf(xi, 0.0, bridge_variance(&m, t)).exp();
            assert_relative_eq!(s.log_normalizer.exp(), ratio, max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_cash_component_ignores_flow_law() {
        let m = long_horizon();
        let var = bridge_variance(&m, 2.0);
        assert_relative_eq!(
            joint_density(&m, 2.0, 0.7, 0).unwrap(),
            0.2 * ln_normal_pdf(0.7, 0.0, var).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn limits_and_degenerate_law() {
        let m = long_horizon();
        assert!(mutual_info_quadrature(&m, 1e-6).unwrap().value < 1e-5);
        let one = MarketModel::new(vec![1.0], vec![1.0], vec![0.5, 0.9], vec![0.5, 0.5], 5.0, 0.0).unwrap();
        assert_eq!(mutual_info_quadrature(&one, 2.0).unwrap().value, 0.0);
        assert_eq!(mutual_info_entropy(&one, 2.0, 1000, 1).unwrap().value, 0.0);
        assert!(matches!(mutual_info_quadrature(&m, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(mutual_info_entropy(&m, 1.0, 10, 1), Err(Error::TooFewPaths { .. })));
    }

    #[test]
    fn prior_entropy_value() {
        assert_relative_eq!(prior_entropy(&long_horizon()), 0.500_402_423_538_188_4, epsilon = 1e-15);
    }

    #[test]
    fn routes_agree_and_respect_bounds() {
        let m = long_horizon();
        let c = mutual_info_curve(&m, &[1.0, 2.5, 4.5, 4.98], 4000, 17).unwrap();
        for (j, err) in c.combined_error().iter().enumerate() {
            assert!(
                (c.j_quadrature[j] - c.j_entropy[j]).abs() < 3.0 * err,
                "t={}: {} vs {}",
                c.t[j],
                c.j_quadrature[j],
                c.j_entropy[j]
            );
            assert!(c.j_quadrature[j] >= 0.0 && c.j_quadrature[j] <= c.prior_entropy);
        }
        assert!(c.j_quadrature.windows(2).all(|w| w[1] >= w[0]));
        assert!(c.prior_entropy - c.j_quadrature[3] < 0.05);
    }
}
