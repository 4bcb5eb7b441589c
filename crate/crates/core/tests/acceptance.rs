//! Acceptance suite: one test per criterion, each printing a single
//! `PASS`/`FAIL` line with the measured quantities and its runtime budget.
//!
//! Run with `cargo test -p qbatt-core --test acceptance -- --nocapture` to
//! see every line.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::Matrix4;
use qbatt_core::circuit::{run_ensemble_with_plan, CircuitConfig, CircuitPlan};
use qbatt_core::config::{InitialState, RunConfig};
use qbatt_core::integrator::{evolve, EvolutionConfig, Mode};
use qbatt_core::model::{build_rate_schedule, gamma0_of_t, gamma0_roots, gamma_xi, Channel, RateSchedule};
use qbatt_core::nmqj::{self, NmqjConfig};
use qbatt_core::observables::{concurrence, ergotropy_fraction, ergotropy_oracle, spin_flip, ObservableSeries};
use qbatt_core::qmath::{on_charger, qubit, sigma_z, Mat4, C64};
use qbatt_core::scenario::{
    fig2_params, fig5_params, long_time_series, propagator_series, rk4_series, run_scenario, FIG5_DT, FIG5_LONG_T_MAX,
    SCENARIOS,
};
use qbatt_core::{DensityMatrix4, Ket4, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, title: &str, pass: bool, detail: &str, elapsed: Duration, budget: Option<Duration>) -> bool {
    let in_budget = budget.is_none_or(|b| elapsed <= b);
    let ok = pass && in_budget;
    let timing = match budget {
        Some(b) => format!("{:.2}s of {:.0}s", elapsed.as_secs_f64(), b.as_secs_f64()),
        None => format!("{:.2}s", elapsed.as_secs_f64()),
    };
    println!("{} criterion {id} ({title}): {detail} [{timing}]", if ok { "PASS" } else { "FAIL" });
    ok
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn ergotropy_column(s: &ObservableSeries) -> Vec<f64> {
    s.column(|r| r.ergotropy_over_omega_b)
}

fn upy_down() -> DensityMatrix4 {
    DensityMatrix4::pure(&InitialState::UpYDown.ket())
}

/// Index ranges of the rows where `γ₀ < 0`.
fn negative_runs(gamma0: &[f64]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (k, &g) in gamma0.iter().enumerate() {
        match (g < 0.0, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                runs.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, gamma0.len()));
    }
    runs
}

#[test]
fn criterion_1_rate_curve_shape() {
    let start = Instant::now();
    let params = SystemParams { eta_sq: 1.0, ..fig2_params() };
    let sched = build_rate_schedule(&params, 4.0, 1e-3, false).unwrap();
    let negatives = sched.negative_segments().count();
    let roots = gamma0_roots(&params, 0.0, 4.0, 1e-3);
    let bounded = roots.len() == 2 && roots.iter().all(|&r| r > 0.5 && r < 1.1);
    let plateau = gamma0_of_t(&params, 30.0) / (params.eta_sq / (4.0 * (1.0 + params.s * params.s)));
    let grid = (0..=40_000).map(|k| k as f64 * 1e-4);
    let (mut max0, mut max_pm) = (0.0f64, 0.0f64);
    for t in grid {
        max0 = max0.max(gamma0_of_t(&params, t).abs());
        max_pm = max_pm.max(gamma_xi(&params, t, Channel::Plus).abs()).max(gamma_xi(&params, t, Channel::Minus).abs());
    }
    let ratio = max_pm / max0;
    let pass = negatives == 1 && bounded && (plateau - 1.0).abs() <= 1e-5 && ratio < 1e-2;
    let detail = format!(
        "negative segments {negatives}, roots {roots:?}, plateau ratio {plateau:.8}, max|gamma_pm|/max|gamma0| = {ratio:.4} (< 1e-2 required)"
    );
    assert!(report(1, "rate curve shape", pass, &detail, start.elapsed(), secs(1)));
}

#[test]
fn criterion_2_entanglement_revival() {
    let start = Instant::now();
    let params = SystemParams { g: 0.0, ..fig2_params() };
    let cfg = EvolutionConfig { dt: 2e-4, t_max: 4.0, record_stride: 1, ..Default::default() };
    let series = rk4_series(&params, &DensityMatrix4::pure(&Ket4::bell_psi_plus()), &cfg).unwrap();
    let c = series.column(|r| r.concurrence);
    let g = series.column(|r| r.gamma0);
    let mut worst_rise = f64::NEG_INFINITY;
    for k in 0..c.len() - 1 {
        if g[k] > 0.0 && g[k + 1] > 0.0 {
            worst_rise = worst_rise.max(c[k + 1] - c[k]);
        }
    }
    let runs = negative_runs(&g);
    let revival =
        runs.first().map(|&(a, b)| c[a..b].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - c[a]).unwrap_or(0.0);
    let pass = worst_rise <= 1e-6 && revival >= 1e-3;
    let detail = format!(
        "largest step rise in positive intervals {worst_rise:.3e}, revival inside negative segment {revival:.4e}"
    );
    assert!(report(2, "entanglement revival", pass, &detail, start.elapsed(), secs(10)));
}

#[test]
fn criterion_3_unitary_charging_time() {
    let start = Instant::now();
    let params = SystemParams::default();
    let cfg = EvolutionConfig { dt: 2e-4, t_max: 1.2, mode: Mode::Unitary, ..Default::default() };
    let series = rk4_series(&params, &upy_down(), &cfg).unwrap();
    let e = ergotropy_column(&series);
    let t = series.times();
    let maxima: Vec<usize> = (1..e.len() - 1).filter(|&k| e[k] >= e[k - 1] && e[k] > e[k + 1]).collect();
    let charged = maxima.iter().copied().find(|&k| e[k] >= 0.95);
    let (t_peak, e_peak) = charged.map(|k| (t[k], e[k])).unwrap_or((f64::NAN, f64::NAN));
    let partial: Vec<String> =
        maxima.iter().take_while(|&&k| Some(k) != charged).map(|&k| format!("{:.3}@{:.4}", e[k], t[k])).collect();
    let pass = (t_peak - 0.95).abs() <= 0.05 && e_peak >= 0.95;
    let detail = format!(
        "first maximal charge at lambda t = {t_peak:.4} with ergotropy/omega_B = {e_peak:.6}; earlier partial maxima [{}]",
        partial.join(", ")
    );
    assert!(report(3, "unitary charging time", pass, &detail, start.elapsed(), secs(10)));
}

#[test]
fn criterion_4_non_markovian_advantage() {
    let start = Instant::now();
    let params = SystemParams { eta_sq: 3.0, ..Default::default() };
    let peak = |mode| {
        let cfg = EvolutionConfig { dt: 2e-4, t_max: 1.2, mode, ..Default::default() };
        ergotropy_column(&rk4_series(&params, &upy_down(), &cfg).unwrap()).into_iter().fold(0.0, f64::max)
    };
    let (i, ii, iii) = (peak(Mode::NonMarkovian), peak(Mode::MarkovianAsymptotic), peak(Mode::Unitary));
    let margin = i - ii;
    let pass = margin > 0.0 && iii >= i && i >= ii;
    let detail =
        format!("max ergotropy case i {i:.6}, case ii {ii:.6}, case iii {iii:.6}, margin i - ii = {margin:.3e}");
    assert!(report(4, "non-Markovian advantage", pass, &detail, start.elapsed(), secs(30)));
}

#[test]
fn criterion_5_trajectory_weights() {
    let start = Instant::now();
    let params = SystemParams::default();
    let cfg = NmqjConfig { dt: 5e-4, t_max: 1.2, n_max: 2, ..Default::default() };
    let run = nmqj::run(&InitialState::UpYDown.ket(), &params, &cfg).unwrap();
    let rows = run.series.rows();
    let k0: Vec<f64> = rows.iter().map(|r| r.k0.unwrap()).collect();
    let g = run.series.column(|r| r.gamma0);
    let increases_while_positive = (0..k0.len() - 1).filter(|&k| g[k] > 0.0 && k0[k + 1] > k0[k]).count();
    let runs = negative_runs(&g);
    let revival = runs.first().map(|&(a, b)| k0[b.min(k0.len() - 1)] - k0[a]).unwrap_or(0.0);
    let min_total = rows.iter().map(|r| r.k_total.unwrap()).fold(f64::INFINITY, f64::min);
    let pass = increases_while_positive == 0 && revival > 0.0 && min_total > 0.98;
    let detail = format!(
        "K0 increases in positive steps: {increases_while_positive}, K0 net change across negative segment {revival:.4e}, min total weight {min_total:.6}"
    );
    assert!(report(5, "trajectory weights", pass, &detail, start.elapsed(), secs(60)));
}

#[test]
fn criterion_6_truncation_convergence() {
    let start = Instant::now();
    let params = SystemParams::default();
    let psi = InitialState::UpYDown.ket();
    let dt = 5e-4;
    let curve = |n_max| {
        let cfg = NmqjConfig { dt, t_max: 1.2, n_max, renormalize: true, ..Default::default() };
        ergotropy_column(&nmqj::run(&psi, &params, &cfg).unwrap().series)
    };
    let (e0, e1, e2) = (curve(0), curve(1), curve(2));
    let unitary = ergotropy_column(&propagator_series(&params, InitialState::UpYDown, dt, 1.2, 1).unwrap());
    let rk4_cfg = EvolutionConfig { dt, t_max: 1.2, ..Default::default() };
    let rk4 = ergotropy_column(&rk4_series(&params, &upy_down(), &rk4_cfg).unwrap());
    let d0u = max_abs_diff(&e0, &unitary);
    let (d21, d10) = (max_abs_diff(&e2, &e1), max_abs_diff(&e1, &e0));
    let d2r = max_abs_diff(&e2, &rk4);
    let pass = d0u <= 1e-9 && d21 < d10 && d2r < 1e-2;
    let detail = format!("|E0 - unitary| {d0u:.3e}, |E2 - E1| {d21:.3e} vs |E1 - E0| {d10:.3e}, |E2 - RK4| {d2r:.3e}");
    assert!(report(6, "truncation convergence", pass, &detail, start.elapsed(), secs(120)));
}

#[test]
fn criterion_7_trajectory_rk4_convergence() {
    let start = Instant::now();
    let params = fig5_params();
    let psi = InitialState::UpYDown.ket();
    let rk4_cfg = EvolutionConfig { dt: 2e-4, t_max: 1.2, ..Default::default() };
    let rk4 = rk4_series(&params, &upy_down(), &rk4_cfg).unwrap();
    let run = |dt: f64| nmqj::run(&psi, &params, &NmqjConfig { dt, t_max: 1.2, ..Default::default() }).unwrap().series;
    let terminal = |series: &ObservableSeries, dt: f64| {
        let sched = build_rate_schedule(&params, 1.2, dt, false).unwrap();
        let t_end = sched.t_grid[sched.end_of_first_negative().unwrap()];
        let a = series.nearest(t_end).unwrap().ergotropy_over_omega_b;
        let b = rk4.nearest(t_end).unwrap().ergotropy_over_omega_b;
        (t_end, (a - b).abs())
    };
    let fine = run(2e-4);
    let coarse = run(1e-3);
    let max_dev = max_abs_diff(&ergotropy_column(&fine), &ergotropy_column(&rk4));
    let (tf, df) = terminal(&fine, 2e-4);
    let (tc, dc) = terminal(&coarse, 1e-3);
    let pass = max_dev <= 1e-2 && dc > df;
    let detail = format!(
        "max |E(dt=2e-4) - RK4| {max_dev:.3e}, terminal deviation dt=1e-3 {dc:.3e} at {tc:.4} vs dt=2e-4 {df:.3e} at {tf:.4}"
    );
    assert!(report(7, "trajectory to RK4 convergence", pass, &detail, start.elapsed(), secs(120)));
}

#[test]
fn criterion_8_long_time_run() {
    let start = Instant::now();
    let params = fig5_params();
    let rk4 = EvolutionConfig { dt: 2e-4, t_max: FIG5_LONG_T_MAX, record_stride: 50, ..Default::default() };
    let curves: Vec<ObservableSeries> = FIG5_DT
        .iter()
        .map(|&dt| {
            let history = NmqjConfig { dt, t_max: 1.2, ..Default::default() };
            long_time_series(&params, InitialState::UpYDown, &history, &rk4).unwrap().1
        })
        .collect();
    let at = |s: &ObservableSeries| s.nearest(7.5).unwrap().ergotropy_over_omega_b;
    let (e_fine, e_mid, e_coarse) = (at(&curves[0]), at(&curves[1]), at(&curves[2]));
    let ordered = e_coarse > e_mid && e_mid > e_fine;
    let window_max = curves[2]
        .rows()
        .iter()
        .filter(|r| (r.lambda_t - 7.5).abs() <= 0.5)
        .map(|r| r.ergotropy_over_omega_b)
        .fold(0.0, f64::max);
    let pass = ordered && window_max >= 0.2;
    let detail = format!(
        "ergotropy at 7.5: dt=1e-3 {e_coarse:.6e}, dt=5e-4 {e_mid:.6e}, dt=2e-4 {e_fine:.6e}; dt=1e-3 max over [7, 8] {window_max:.6e} (>= 0.2 required)"
    );
    assert!(report(8, "long-time continuation", pass, &detail, start.elapsed(), secs(300)));
}

fn random_state(rng: &mut ChaCha8Rng) -> DensityMatrix4 {
    let g = Mat4::from_row_major(
        &(0..16).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect::<Vec<_>>(),
    )
    .unwrap();
    let m = g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix4::new(m.scale_real(1.0 / tr)).unwrap()
}

fn random_pure(rng: &mut ChaCha8Rng) -> DensityMatrix4 {
    let psi = Ket4(std::array::from_fn(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
    DensityMatrix4::pure(&psi.normalized())
}

/// Concurrence from the eigenvalues of the non-Hermitian `ρ ρ̃`.
fn concurrence_non_hermitian(rho: &DensityMatrix4) -> f64 {
    let product = *rho.matrix() * spin_flip(rho.matrix());
    let m = Matrix4::from_fn(|i, j| product.0[i][j]);
    let eig = m.schur().eigenvalues().expect("triangular Schur form");
    let mut roots: Vec<f64> = eig.iter().map(|z| z.re.max(0.0).sqrt()).collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    (roots[0] - roots[1] - roots[2] - roots[3]).max(0.0)
}

fn check(label: &str, pass: bool, detail: String) -> bool {
    println!("  {} {label}: {detail}", if pass { "ok  " } else { "FAIL" });
    pass
}

fn scenario_monitors() -> bool {
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_scenarios");
    let mut all = true;
    for name in SCENARIOS {
        let result = run_scenario(name, &RunConfig::default(), &out);
        let detail = match &result {
            Ok(files) => format!("{} files", files.len()),
            Err(e) => e.to_string(),
        };
        all &= check(&format!("monitors on {name}"), result.is_ok(), detail);
    }
    all
}

fn ergotropy_oracle_agreement(rng: &mut ChaCha8Rng) -> bool {
    let worst = (0..1000)
        .map(|k| if k % 4 == 0 { random_pure(rng) } else { random_state(rng) })
        .map(|rho| (ergotropy_fraction(&rho) - ergotropy_oracle(&rho.battery(), 1.0).unwrap()).abs())
        .fold(0.0, f64::max);
    check("ergotropy closed form vs passive state", worst <= 1e-12, format!("max difference {worst:.3e}"))
}

fn concurrence_oracle_agreement(rng: &mut ChaCha8Rng) -> bool {
    let worst = (0..1000)
        .map(|_| random_state(rng))
        .map(|rho| (concurrence(&rho).unwrap() - concurrence_non_hermitian(&rho)).abs())
        .fold(0.0, f64::max);
    check("concurrence Hermitian vs non-Hermitian route", worst <= 1e-9, format!("max difference {worst:.3e}"))
}

/// `H = 0` with the constant rate `γ₀(∞) = η²/4` (at `s = 0`).
fn still(gamma: f64) -> SystemParams {
    SystemParams { drive: 0.0, omega_b: 0.0, g: 0.0, s: 0.0, eta_sq: 4.0 * gamma, ..Default::default() }
}

fn sigma_z_charger(rho: &DensityMatrix4) -> f64 {
    rho.expectation(&on_charger(&sigma_z()))
}

fn analytic_dephasing() -> bool {
    let gamma = 0.5;
    let cfg = EvolutionConfig {
        dt: 1e-3,
        t_max: 2.0,
        mode: Mode::MarkovianAsymptotic,
        record_stride: 100,
        ..Default::default()
    };
    let rho0 = DensityMatrix4::pure(&Ket4::product(qubit::UP, qubit::DOWN));
    let ev = evolve(&rho0, &cfg, &still(gamma)).unwrap();
    let worst = ev
        .times
        .iter()
        .zip(&ev.states)
        .map(|(&t, rho)| (sigma_z_charger(rho) - (-2.0 * gamma * t).exp()).abs())
        .fold(0.0, f64::max);
    check("constant-rate dephasing vs exp(-2 gamma t)", worst <= 1e-8, format!("max deviation {worst:.3e}"))
}

fn rk4_order() -> bool {
    let params = still(1.0);
    let rho0 = DensityMatrix4::pure(&Ket4::product(qubit::UP, qubit::DOWN));
    let err = |dt: f64| {
        let cfg = EvolutionConfig {
            dt,
            t_max: 1.0,
            mode: Mode::MarkovianAsymptotic,
            record_stride: 1_000_000,
            ..Default::default()
        };
        let ev = evolve(&rho0, &cfg, &params).unwrap();
        (sigma_z_charger(ev.last().1) - (-2.0f64).exp()).abs()
    };
    let order = (err(0.1) / err(0.05)).log2();
    check("RK4 convergence exponent", (order - 4.0).abs() <= 0.2, format!("exponent {order:.4}"))
}

fn monte_carlo_exponent() -> bool {
    let (gamma, dt, cycles) = (0.5, 0.01, 100);
    let frozen = SystemParams { drive: 0.0, omega_b: 0.0, g: 0.0, ..Default::default() };
    let plan =
        CircuitPlan::with_schedule(&frozen, RateSchedule::from_rates(dt, vec![gamma; cycles + 1]).unwrap()).unwrap();
    let psi0 = Ket4::product(qubit::UP, qubit::DOWN);
    let rms = |shots: usize| {
        let (mut sq, mut count) = (0.0, 0.0);
        for seed in 0..20 {
            let cfg = CircuitConfig { dt, t_max: 1.0, shots, seed, record_stride: 10, ..Default::default() };
            let run = run_ensemble_with_plan(&psi0, &plan, &cfg).unwrap();
            for (k, rho) in run.rho_avg.iter().enumerate().skip(1) {
                let exact = (1.0 - 2.0 * gamma * dt).powi((k * 10) as i32);
                sq += (sigma_z_charger(rho) - exact).powi(2);
                count += 1.0;
            }
        }
        (sq / count).sqrt()
    };
    let ns = [100usize, 1000, 10_000];
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ns.iter().map(|&n| rms(n).ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    check("Monte-Carlo error exponent", (slope + 0.5).abs() <= 0.1, format!("exponent {slope:.4}"))
}

#[test]
fn criterion_9_property_suites() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let results = [
        scenario_monitors(),
        ergotropy_oracle_agreement(&mut rng),
        concurrence_oracle_agreement(&mut rng),
        analytic_dephasing(),
        rk4_order(),
        monte_carlo_exponent(),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    let detail = format!("{passed} of {} suites pass", results.len());
    assert!(report(9, "property suites", passed == results.len(), &detail, start.elapsed(), None));
}
