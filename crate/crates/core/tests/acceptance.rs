//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every oracle here is written independently of the library code it
//! checks. Run with `cargo test --test acceptance`; pass substrings of
//! criterion names to run a subset.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use infoflow::cli::{run, Cli};
use infoflow::dynamics::{ensemble_volatility, innovations, price_series, volatility, DEFAULT_VOL_WINDOW};
use infoflow::inference::{bond_price, posterior};
use infoflow::infotheory::mutual_info_curve;
use infoflow::manipulation::{conjugate_paths, manipulation_report};
use infoflow::model::validate_measurability;
use infoflow::options::{
    call_price_closed, call_price_mc, critical_information, out_of_the_money_kind, phi_inverse_path, price_closed,
    vol_surface, OptionKind, OptionSpec,
};
use infoflow::paths::{make_ensemble, TimeGrid};
use infoflow::sensitivity::{
    dpi_dsigma, expected_fisher, fisher_direct, fisher_variance_form, fisher_variance_form_with, VariancePrefactor,
};
use infoflow::MarketModel;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn two_rate() -> MarketModel {
    MarketModel::new(vec![0.0, 1.0], vec![0.2, 0.8], vec![0.6, 0.8], vec![0.5, 0.5], 1.0, 0.0).unwrap()
}

fn three_cash() -> MarketModel {
    MarketModel::new(vec![0.0, 0.5, 1.0], vec![0.1, 0.15, 0.75], vec![1.0], vec![1.0], 1.0, 0.0).unwrap()
}

fn long_horizon() -> MarketModel {
    MarketModel::new(vec![0.0, 1.0], vec![0.2, 0.8], vec![0.5, 0.9], vec![0.5, 0.5], 5.0, 0.0).unwrap()
}

fn wide_rate() -> MarketModel {
    MarketModel::new(vec![0.0, 1.0], vec![0.2, 0.8], vec![0.3, 2.7], vec![0.5, 0.5], 2.0, 0.0).unwrap()
}

const STRIKES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const MATURITIES: [f64; 3] = [0.25, 0.5, 1.0];

fn ln_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Standard normal CDF by Simpson integration of the density, accurate to
/// about 1e-15 on the range used here.
fn oracle_normal_cdf(z: f64) -> f64 {
    if z < 0.0 {
        return 1.0 - oracle_normal_cdf(-z);
    }
    let n = 20_000;
    let h = z / n as f64;
    let f = |x: f64| (-0.5 * x * x).exp();
    let mut s = f(0.0) + f(z);
    for j in 1..n {
        s += if j % 2 == 1 { 4.0 } else { 2.0 } * f(j as f64 * h);
    }
    0.5 + s * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

fn posterior_oracle_check() -> Verdict {
    // Posterior from the Gaussian mixture ξ_t | (x_i, σ_k) ~ N(σ_k x_i t, t(T-t)/T)
    // weighted by p_i q_k, evaluated in the log domain.
    let m = two_rate();
    let horizon = m.horizon();
    let mut worst: f64 = 0.0;
    for a in 0..100 {
        let t = 0.996 * horizon * (a + 1) as f64 / 100.0;
        let var = t * (horizon - t) / horizon;
        for b in 0..100 {
            let xi = -1.5 + 3.5 * b as f64 / 99.0;
            let mut terms = Vec::new();
            for (x, p) in m.cash_values().iter().zip(m.cash_probs()) {
                for (s, q) in m.flow_values().iter().zip(m.flow_probs()) {
                    let mean = s * x * t;
                    terms.push(p.ln() + q.ln() - 0.5 * (xi - mean) * (xi - mean) / var);
                }
            }
            let norm = ln_sum_exp(&terms);
            let n_flow = m.n_flow();
            let state = posterior(&m, t, xi).unwrap();
            let mut mean_x = 0.0;
            for i in 0..m.n_cash() {
                let pi: f64 = terms[i * n_flow..(i + 1) * n_flow].iter().map(|w| (w - norm).exp()).sum();
                mean_x += pi * m.cash_values()[i];
                worst = worst.max((pi - state.marginal_probs[i]).abs());
            }
            worst = worst.max((mean_x - bond_price(&m, t, xi).unwrap()).abs());
        }
    }
    verdict(worst <= 1e-12, format!("max |Δπ|, |ΔB| over 100×100 (t, ξ) = {worst:.2e} (tol 1e-12)"))
}

fn martingale_suite() -> Verdict {
    let m = two_rate();
    let grid = TimeGrid::default_for(m.horizon()).unwrap();
    let ens = make_ensemble(&m, &grid, 5000, 2024).unwrap();
    let n_pts = grid.len();
    // Per-path series: π_0, π_1, B, W, Φ⁻¹.
    let series: Vec<[Vec<f64>; 5]> = ens
        .paths
        .iter()
        .map(|p| {
            let states: Vec<_> = p.times().iter().zip(&p.xi).map(|(&t, &x)| posterior(&m, t, x).unwrap()).collect();
            [
                states.iter().map(|s| s.marginal_probs[0]).collect(),
                states.iter().map(|s| s.marginal_probs[1]).collect(),
                price_series(p, &m).unwrap(),
                innovations(p, &m).unwrap().w,
                phi_inverse_path(p, &m).unwrap().phi_inverse,
            ]
        })
        .collect();
    let names = ["π_0", "π_1", "B", "W", "Φ⁻¹"];
    let targets = [0.2, 0.8, 0.8, 0.0, 1.0];
    let mut worst = [0.0f64; 5];
    let mut failures = Vec::new();
    for q in 0..5 {
        for j in 0..n_pts {
            let v: Vec<f64> = series.iter().map(|s| s[q][j]).collect();
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
            let se = sd / n.sqrt();
            // The 1e-12 slack absorbs summation rounding where every path
            // holds the same value (t = 0) and the standard error vanishes.
            let gap = ((mean - targets[q]).abs() - 1e-12).max(0.0);
            let z = if gap == 0.0 { 0.0 } else { gap / se };
            worst[q] = worst[q].max(z);
            if z > 4.0 {
                failures.push(format!("{} at t={:.3}", names[q], grid.points()[j]));
            }
        }
    }
    let summary: Vec<String> = names.iter().zip(&worst).map(|(n, z)| format!("{n} {z:.2}")).collect();
    verdict(
        failures.is_empty(),
        format!(
            "5000 paths × {n_pts} points; worst |z| per quantity: {} (tol 4){}",
            summary.join(", "),
            if failures.is_empty() { String::new() } else { format!("; breaches: {}", failures.join(", ")) }
        ),
    )
}

/// Constant-flow-rate model with flow rate `sigma`, coded from scratch.
struct ConstantRate<'a> {
    x: &'a [f64],
    p: &'a [f64],
    sigma: f64,
    horizon: f64,
}

impl ConstantRate<'_> {
    fn pi(&self, t: f64, xi: f64) -> Vec<f64> {
        let scale = self.horizon / (self.horizon - t);
        let w: Vec<f64> = self
            .x
            .iter()
            .zip(self.p)
            .map(|(x, p)| p.ln() + scale * (self.sigma * x * xi - 0.5 * self.sigma * self.sigma * x * x * t))
            .collect();
        let norm = ln_sum_exp(&w);
        w.iter().map(|v| (v - norm).exp()).collect()
    }
    fn price(&self, t: f64, xi: f64) -> f64 {
        self.pi(t, xi).iter().zip(self.x).map(|(p, x)| p * x).sum()
    }
    fn vol(&self, t: f64, xi: f64) -> f64 {
        let pi = self.pi(t, xi);
        let mean: f64 = pi.iter().zip(self.x).map(|(p, x)| p * x).sum();
        let var: f64 = pi.iter().zip(self.x).map(|(p, x)| p * (x - mean) * (x - mean)).sum();
        self.sigma * self.horizon / (self.horizon - t) * var
    }
    fn xi_star(&self, t: f64, k: f64) -> f64 {
        let (mut lo, mut hi) = (-50.0, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.price(t, mid) < k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
    fn call(&self, t: f64, k: f64) -> f64 {
        // Under the bridge measure ξ_t = sd·Y with Y standard normal, so
        // E[exp(aY - a²/2) 1{Y > y*}] = N(a - y*) with a = σ x √(tT/(T-t)).
        let sd = (t * (self.horizon - t) / self.horizon).sqrt();
        let y_star = self.xi_star(t, k) / sd;
        let root = (t * self.horizon / (self.horizon - t)).sqrt();
        self.x.iter().zip(self.p).map(|(x, p)| p * (x - k) * oracle_normal_cdf(self.sigma * x * root - y_star)).sum()
    }
}

fn constant_sigma_reduction() -> Verdict {
    let m = MarketModel::new(vec![0.0, 1.0], vec![0.2, 0.8], vec![0.6, 0.8], vec![0.0, 1.0], 1.0, 0.0).unwrap();
    let oracle = ConstantRate { x: m.cash_values(), p: m.cash_probs(), sigma: 0.8, horizon: 1.0 };
    let mut worst = [0.0f64; 5];
    for a in 1..=20 {
        let t = 0.045 * a as f64;
        for b in 0..=20 {
            let xi = -1.0 + 0.15 * b as f64;
            let s = posterior(&m, t, xi).unwrap();
            let pi = oracle.pi(t, xi);
            for i in 0..2 {
                worst[0] = worst[0].max((s.marginal_probs[i] - pi[i]).abs());
            }
            worst[1] = worst[1].max((bond_price(&m, t, xi).unwrap() - oracle.price(t, xi)).abs());
            worst[2] = worst[2].max((volatility(&m, t, xi).unwrap() - oracle.vol(t, xi)).abs());
        }
    }
    for &t in &[0.1, 0.25, 0.5, 0.75, 0.9] {
        for &k in &STRIKES {
            let spec = OptionSpec::new(t, k).unwrap();
            let xs = critical_information(&m, &spec).unwrap();
            // ξ* is flat in price only where the bond price saturates; compare
            // the prices the two roots produce as well as the roots.
            let gap = (xs - oracle.xi_star(t, k)).abs();
            worst[3] = worst[3].max(gap.min((oracle.price(t, xs) - k).abs()));
            worst[4] = worst[4].max((call_price_closed(&m, &spec).unwrap() - oracle.call(t, k)).abs());
        }
    }
    let names = ["posterior", "price", "volatility", "ξ*", "call"];
    let pass = worst.iter().all(|w| *w <= 1e-12);
    let detail: Vec<String> = names.iter().zip(&worst).map(|(n, w)| format!("{n} {w:.1e}")).collect();
    verdict(
        pass,
        format!("q={{0,1}}, σ=0.8 vs independent constant-rate code; max abs gaps: {} (tol 1e-12)", detail.join(", ")),
    )
}

fn fisher_identity() -> Verdict {
    let m = three_cash();
    let mut printed_gap: f64 = 0.0;
    let mut unit_gap: f64 = 0.0;
    for &sigma in &[0.1, 0.5, 1.0, 1.5, 3.0] {
        for a in 1..=19 {
            let t = 0.05 * a as f64;
            for b in 0..=16 {
                let xi = -2.0 + 0.3 * b as f64;
                let direct = fisher_direct(&m, sigma, t, xi).unwrap();
                let scale = direct.abs().max(1e-300);
                let printed = fisher_variance_form(&m, sigma, t, xi).unwrap();
                let unit = fisher_variance_form_with(&m, sigma, t, xi, VariancePrefactor::Unit).unwrap();
                printed_gap = printed_gap.max((printed - direct).abs() / scale.max(1.0));
                unit_gap = unit_gap.max((unit - direct).abs() / scale.max(1.0));
            }
        }
    }
    let identity_ok = printed_gap <= 1e-10;

    // Central differences of the general posterior at a degenerate flow law.
    let h = 1e-5;
    let mut fd_gap: f64 = 0.0;
    for &sigma in &[0.3, 0.9, 1.4] {
        for &(t, xi) in &[(0.1, 0.05), (0.5, 0.3), (0.5, -0.4), (0.8, 0.9), (0.95, 0.7)] {
            let up = posterior(&m.with_constant_flow(sigma + h).unwrap(), t, xi).unwrap().marginal_probs;
            let dn = posterior(&m.with_constant_flow(sigma - h).unwrap(), t, xi).unwrap().marginal_probs;
            let d = dpi_dsigma(&m, sigma, t, xi).unwrap();
            let norm = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for i in 0..d.len() {
                let fd = (up[i] - dn[i]) / (2.0 * h);
                fd_gap = fd_gap.max((fd - d[i]).abs() / norm);
            }
        }
    }
    let fd_ok = fd_gap <= 1e-6;

    let sigmas: Vec<f64> = (1..=15).map(|j| 0.1 * j as f64).collect();
    let est: Vec<_> = sigmas.iter().map(|&s| expected_fisher(&m, s, 0.5, 1000, 11).unwrap()).collect();
    let mut worst_z = f64::INFINITY;
    for w in est.windows(2) {
        let joint = w[0].std_err.hypot(w[1].std_err);
        worst_z = worst_z.min((w[1].value - w[0].value) / joint);
    }
    let mono_ok = worst_z >= -2.0;

    verdict(
        identity_ok && fd_ok && mono_ok,
        format!(
            "identity as printed {} (max rel gap {printed_gap:.2e}; with unit prefactor {unit_gap:.1e}); \
             ∂π/∂σ vs FD {} ({fd_gap:.1e}, tol 1e-6); E[g] increasing in σ at t=0.5 {} \
             (min adjacent step {worst_z:.1} joint SE, tol -2)",
            if identity_ok { "ok" } else { "FAILS" },
            if fd_ok { "ok" } else { "FAILS" },
            if mono_ok { "ok" } else { "FAILS" },
        ),
    )
}

fn mutual_information() -> Verdict {
    let m = long_horizon();
    let h0 = -m.cash_probs().iter().map(|p| p * p.ln()).sum::<f64>();
    let t_max = 0.996 * m.horizon();
    let times: Vec<f64> = (1..=20).map(|j| t_max * j as f64 / 20.0).collect();
    let c = mutual_info_curve(&m, &times, 5000, 5).unwrap();
    let err = c.combined_error();
    let worst_z = (0..times.len()).map(|j| (c.j_quadrature[j] - c.j_entropy[j]).abs() / err[j]).fold(0.0, f64::max);
    let monotone = c.j_quadrature.windows(2).all(|w| w[1] >= w[0]);
    let bounded = c.j_quadrature.iter().all(|j| *j >= 0.0 && *j <= h0);
    let h0_ok = (h0 - 0.500402).abs() < 5e-7 && (c.prior_entropy - h0).abs() < 1e-15;
    verdict(
        worst_z <= 3.0 && monotone && bounded && h0_ok,
        format!(
            "20 times; worst route gap {worst_z:.2} combined errors (tol 3); nondecreasing {monotone}; \
             0 ≤ J ≤ H_0={h0:.6} {bounded}; J(0.996T)={:.6}",
            c.j_quadrature[19]
        ),
    )
}

fn option_pricing() -> Verdict {
    let m = wide_rate();
    let mut worst_z: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    let mut node = 0u64;
    for &t in &MATURITIES {
        for &k in &STRIKES {
            let spec = OptionSpec::new(t, k).unwrap();
            let closed = call_price_closed(&m, &spec).unwrap();
            let mc = call_price_mc(&m, &spec, 100_000, 600 + node).unwrap();
            worst_z = worst_z.max((closed - mc.value).abs() / mc.std_err);
            let xs = critical_information(&m, &spec).unwrap();
            worst_res = worst_res.max((bond_price(&m, t, xs).unwrap() - k).abs());
            node += 1;
        }
    }
    verdict(
        worst_z <= 3.0 && worst_res < 1e-10,
        format!("27 nodes, 100k paths each; worst |closed - MC| = {worst_z:.2} SE (tol 3); max |B(ξ*) - K| = {worst_res:.1e} (tol 1e-10)"),
    )
}

fn implied_round_trip() -> Verdict {
    let m = wide_rate();
    let template = m.with_constant_flow(1.5).unwrap();
    let maturities: Vec<f64> = (1..=19).map(|j| 0.1 * j as f64).collect();
    // Start the search away from the answer so the bracket and bisection
    // do real work; 1.5 is the required rate, the others widen the check.
    let start = m.with_constant_flow(1.0).unwrap();
    let mut worst = [0.0f64; 3];
    let mut all_converged = true;
    for (w, sigma) in worst.iter_mut().zip([1.5, 0.45, 2.2]) {
        let flat = vol_surface(&m.with_constant_flow(sigma).unwrap(), &STRIKES, &maturities, &start).unwrap();
        for (row, conv) in flat.implied_sigma.iter().zip(&flat.converged) {
            for (s, c) in row.iter().zip(conv) {
                all_converged &= *c;
                *w = w.max((s - sigma).abs());
            }
        }
    }
    // The surface calibrates the out-of-the-money side; check the side
    // choice against the call's own forward.
    let spec = OptionSpec::new(0.5, 0.1).unwrap();
    let side_ok = out_of_the_money_kind(&m, &spec).unwrap() == OptionKind::Put
        && price_closed(&m, &spec, OptionKind::Put).unwrap() >= 0.0;
    let random = vol_surface(&m, &STRIKES, &maturities, &template).unwrap();
    let random_converged = random.converged.iter().flatten().all(|c| *c);
    let range = random.implied_range();
    verdict(
        all_converged && worst[0] <= 1e-8 && random_converged && range > 1e-3 && side_ok,
        format!(
            "{} nodes; σ=1.5 round trip max |Δσ| = {:.1e} (tol 1e-8; σ=0.45 {:.1e}, σ=2.2 {:.1e}), \
             all converged {all_converged}; \
             random-σ surface all converged {random_converged}, range {range:.3} (tol > 1e-3)",
            STRIKES.len() * maturities.len(),
            worst[0],
            worst[1],
            worst[2]
        ),
    )
}

fn measurability_gate() -> Verdict {
    let colliding =
        MarketModel::new(vec![0.0, 0.5, 1.0], vec![0.2, 0.3, 0.5], vec![0.5, 1.0], vec![0.5, 0.5], 1.0, 0.0).unwrap();
    let r = validate_measurability(&colliding);
    let exact = r.collisions.len() == 1 && {
        let (a, b) = r.collisions[0];
        (a.cash, a.flow, b.cash, b.flow) == (0.5, 1.0, 1.0, 0.5)
    };
    let measurable_ok = validate_measurability(&two_rate()).is_measurable;
    verdict(
        !r.is_measurable && exact && measurable_ok,
        format!(
            "collision model rejected with {} collision(s) {:?}; two-rate model measurable {measurable_ok}",
            r.collisions.len(),
            r.collisions.iter().map(|(a, b)| ((a.cash, a.flow), (b.cash, b.flow))).collect::<Vec<_>>()
        ),
    )
}

fn volatility_mixture() -> Verdict {
    let base = long_horizon();
    let grid = TimeGrid::default_for(base.horizon()).unwrap();
    let laws: Vec<f64> = (0..=10).map(|j| j as f64 / 10.0).collect();
    let mut curves = Vec::new();
    let mut means = Vec::new();
    for &q0 in &laws {
        let m = base.with_flow(vec![0.5, 0.9], vec![q0, 1.0 - q0]).unwrap();
        let ens = make_ensemble(&m, &grid, 5000, 4).unwrap();
        curves.push(ensemble_volatility(&ens, &m, DEFAULT_VOL_WINDOW).unwrap().mean_vol);
        means.push(m.mean_flow());
    }
    // At t = 0, Σ = E[σ] var(X_T) for a flow rate independent of the cash flow.
    let ordered = (0..laws.len() - 1).all(|j| (curves[j][0] > curves[j + 1][0]) == (means[j] > means[j + 1]));
    let var_x = 0.2 * 0.8;
    let constant_start = |s: f64| {
        let m = base.with_constant_flow(s).unwrap();
        ensemble_volatility(&make_ensemble(&m, &grid, 1000, 4).unwrap(), &m, DEFAULT_VOL_WINDOW).unwrap().mean_vol[0]
    };
    let end_gap = (curves[0][0] - constant_start(0.9)).abs().max((curves[10][0] - constant_start(0.5)).abs());
    let analytic_gap = (curves[0][0] - 0.9 * var_x).abs().max((curves[10][0] - 0.5 * var_x).abs());
    let (high, low) = (&curves[0], &curves[10]);
    let crossing = grid.points().iter().enumerate().find(|(j, t)| **t > 0.5 * base.horizon() && low[*j] > high[*j]);
    verdict(
        ordered && end_gap <= 1e-12 && analytic_gap <= 1e-12 && crossing.is_some(),
        format!(
            "t=0 ordered by E[σ] {ordered}; endpoint vs constant rate at t=0 {end_gap:.1e}, vs E[σ]var(X) {analytic_gap:.1e} \
             (tol 1e-12); late crossing {}",
            match crossing {
                Some((_, t)) => format!("at t={t:.3} (σ=0.5 curve above σ=0.9 curve)"),
                None => "not observed".into(),
            }
        ),
    )
}

fn manipulation_experiment() -> Verdict {
    let truth = MarketModel::constant_flow(vec![0.0, 1.0], vec![0.2, 0.8], 1.0, 5.0, 0.0).unwrap();
    let grid = TimeGrid::default_for(5.0).unwrap();
    let paths = conjugate_paths(&truth, -1.0, &grid, 1000, 7).unwrap();
    let r = manipulation_report(&paths, 1.0).unwrap();
    verdict(
        r.opposite_fraction > 0.5,
        format!(
            "X_T=1, σ=1 vs believed σ=-1; opposite-sign fraction on [0.2T, 0.8T] = {:.3} over {} points (tol > 0.5)",
            r.opposite_fraction, r.interior_points
        ),
    )
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_cli(command: &str, config: &Path, out: &Path, threads: usize, paths: usize) {
    let args = [
        "infoflow",
        command,
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--threads",
        &threads.to_string(),
        "--paths",
        &paths.to_string(),
    ];
    run(&Cli::try_parse_from(args).unwrap()).unwrap();
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let runs = [
        ("simulate", "simulate_rates_06_08.json", 1000),
        ("volatility", "volatility_sweep.json", 1000),
        ("fisher", "fisher_surface.json", 200),
        ("mutual-info", "mutual_info_sweep.json", 1000),
        ("price", "option_price.json", 20_000),
        ("surface", "vol_surface.json", 1000),
        ("manipulate", "manipulation_paid.json", 1000),
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for (command, config, paths) in runs {
        let cfg = configs_dir().join(config);
        let one = tmp.path().join(format!("{command}_1"));
        let eight = tmp.path().join(format!("{command}_8"));
        run_cli(command, &cfg, &one, 1, paths);
        run_cli(command, &cfg, &eight, 8, paths);
        let (a, b) = (csv_files(&one), csv_files(&eight));
        if a.is_empty() || a != b {
            mismatches.push(command);
        }
        compared += a.len();
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{} experiments, {compared} CSVs compared byte for byte under 1 vs 8 threads; mismatches: {:?}",
            runs.len(),
            mismatches
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Verdict); 11] = [
        (1, "posterior oracle equivalence", posterior_oracle_check),
        (2, "martingale suite", martingale_suite),
        (3, "constant-σ reduction", constant_sigma_reduction),
        (4, "fisher identity", fisher_identity),
        (5, "mutual information routes", mutual_information),
        (6, "option pricing", option_pricing),
        (7, "implied volatility round trip", implied_round_trip),
        (8, "measurability gate", measurability_gate),
        (9, "volatility mixture behavior", volatility_mixture),
        (10, "manipulation experiment", manipulation_experiment),
        (11, "determinism", determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("{status} [{id:>2}] {name} ({:.1} s): {}", started.elapsed().as_secs_f64(), v.detail);
        ran += 1;
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
