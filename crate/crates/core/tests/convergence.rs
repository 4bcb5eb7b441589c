//! Cross-module consistency: trajectory and circuit simulators against the
//! master equation, and frame independence of the observables.

use qbatt_core::circuit::{run_ensemble, CircuitConfig};
use qbatt_core::config::InitialState;
use qbatt_core::integrator::{DissipatorKind, EvolutionConfig, Frame, Mode, POSITIVITY_FAIL};
use qbatt_core::model::build_rate_schedule;
use qbatt_core::nmqj::{self, NmqjConfig};
use qbatt_core::observables::ObservableSeries;
use qbatt_core::scenario::{fig2_params, fig5_params, rk4_series};
use qbatt_core::{DensityMatrix4, Ket4, SystemParams};

fn upy_down() -> DensityMatrix4 {
    DensityMatrix4::pure(&InitialState::UpYDown.ket())
}

/// Largest ergotropy deviation over the rows of `a`, matched by time.
fn max_ergotropy_gap(a: &ObservableSeries, b: &ObservableSeries) -> f64 {
    a.rows()
        .iter()
        .map(|r| {
            let other = b.nearest(r.lambda_t).unwrap();
            assert!((other.lambda_t - r.lambda_t).abs() < 1e-9);
            (r.ergotropy_over_omega_b - other.ergotropy_over_omega_b).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn trajectory_error_shrinks_when_dt_halves() {
    for params in [SystemParams::default(), fig5_params()] {
        let reference =
            rk4_series(&params, &upy_down(), &EvolutionConfig { dt: 5e-5, t_max: 1.2, ..Default::default() }).unwrap();
        let gap = |dt: f64| {
            let cfg = NmqjConfig {
                dt,
                t_max: 1.2,
                n_max: 2,
                record_stride: (2e-4 / dt).round() as usize,
                ..Default::default()
            };
            let run = nmqj::run(&InitialState::UpYDown.ket(), &params, &cfg).unwrap();
            max_ergotropy_gap(&run.series, &reference)
        };
        let (coarse, fine) = (gap(2e-4), gap(1e-4));
        assert!(fine < coarse, "g = {}: dt=1e-4 gap {fine:.3e} vs dt=2e-4 gap {coarse:.3e}", params.g);
    }
}

#[test]
fn circuit_matches_trajectories_at_end_of_negative_window() {
    let params = fig5_params();
    let dt = 1e-3;
    let sched = build_rate_schedule(&params, 1.2, dt, false).unwrap();
    let t_end = sched.t_grid[sched.end_of_first_negative().unwrap()];
    let nmqj_cfg = NmqjConfig { dt, t_max: 1.2, ..Default::default() };
    let run = nmqj::run(&InitialState::UpYDown.ket(), &params, &nmqj_cfg).unwrap();
    let want = run.series.nearest(t_end).unwrap().ergotropy_over_omega_b;
    let cfg = CircuitConfig { dt, t_max: 1.2, shots: 10_000, seed: 11, ..Default::default() };
    let ens = run_ensemble(&InitialState::UpYDown.ket(), &params, &cfg).unwrap();
    let row = ens.series.nearest(t_end).unwrap();
    let se = row.ergotropy_se.unwrap();
    let got = row.ergotropy_over_omega_b;
    assert!((got - want).abs() <= 3.0 * se, "circuit {got:.6e} ± {se:.2e} vs trajectories {want:.6e} at {t_end}");
}

#[test]
fn observables_agree_between_frames() {
    for (params, initial) in [
        (SystemParams::default(), upy_down()),
        (SystemParams { eta_sq: 3.0, ..Default::default() }, upy_down()),
        (fig2_params(), DensityMatrix4::pure(&Ket4::bell_psi_plus())),
    ] {
        let base = EvolutionConfig { dt: 1e-4, t_max: 1.2, record_stride: 100, ..Default::default() };
        let rot = rk4_series(&params, &initial, &base).unwrap();
        let co = rk4_series(&params, &initial, &EvolutionConfig { frame: Frame::CoRotating, ..base }).unwrap();
        for (a, b) in rot.rows().iter().zip(co.rows()) {
            assert!((a.ergotropy_over_omega_b - b.ergotropy_over_omega_b).abs() < 1e-6, "t = {}", a.lambda_t);
            assert!((a.concurrence - b.concurrence).abs() < 1e-6, "t = {}", a.lambda_t);
            assert!((a.energy_over_omega_b - b.energy_over_omega_b).abs() < 1e-6, "t = {}", a.lambda_t);
        }
    }
}

#[test]
fn trace_conserved_in_every_mode() {
    for mode in [Mode::NonMarkovian, Mode::MarkovianAsymptotic, Mode::Unitary] {
        for dissipator in [DissipatorKind::DephasingOnly, DissipatorKind::FullSecular] {
            for eta_sq in [0.5, 3.0] {
                let params = SystemParams { eta_sq, ..Default::default() };
                let cfg = EvolutionConfig { mode, dissipator, record_stride: 10, ..Default::default() };
                let series = rk4_series(&params, &upy_down(), &cfg).unwrap();
                for r in series.rows() {
                    assert!(r.trace_dev.abs() < 1e-8, "{mode:?} {dissipator:?} t = {}", r.lambda_t);
                    // the gain channel enters with a negative weight, so the full
                    // secular generator is held to the hard limit only
                    let floor = if dissipator == DissipatorKind::DephasingOnly { -1e-7 } else { POSITIVITY_FAIL };
                    assert!(r.min_eig >= floor, "{mode:?} {dissipator:?} t = {}: {}", r.lambda_t, r.min_eig);
                }
            }
        }
    }
}

#[test]
fn concurrence_never_rises_at_constant_rate() {
    let params = SystemParams { g: 0.0, ..fig2_params() };
    let cfg = EvolutionConfig { t_max: 2.0, mode: Mode::MarkovianAsymptotic, record_stride: 5, ..Default::default() };
    let series = rk4_series(&params, &DensityMatrix4::pure(&Ket4::bell_psi_plus()), &cfg).unwrap();
    let c = series.column(|r| r.concurrence);
    for w in c.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
    }
    assert!(c[c.len() - 1] < c[0] - 1e-3);
}
