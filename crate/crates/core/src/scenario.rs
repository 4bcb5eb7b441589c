//! Named studies that regenerate the reference data sets, and the single-run
//! commands behind the CLI.
//!
//! Each scenario expands into independent curves. A curve is computed,
//! monitored and written to its own CSV file, so curves can run on separate
//! workers (`jobs`) without changing any output byte.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::circuit::{continue_from_temporal_state, run_ensemble, CircuitConfig};
use crate::config::{dissipator_name, mode_name, top_level_name, InitialState, RunConfig};
use crate::csv::{write_series, write_shots, write_values, Header};
use crate::error::{Error, Result};
use crate::integrator::{
    evolve, step_propagator, validate_stepper, EvolutionConfig, MasterEquation, Mode, POSITIVITY_FAIL,
};
use crate::model::{build_rate_schedule, coarse_grained_gamma0, SystemParams};
use crate::nmqj::{self, NmqjConfig};
use crate::observables::{ObservableRow, ObservableSeries};
use crate::qmath::DensityMatrix4;

pub const SCENARIOS: [&str; 6] =
    ["fig2_rates", "fig2_concurrence", "fig3_ergotropy", "fig4_weights", "fig5_earlystage", "fig5_longtime"];

/// Coupling strengths of the four ergotropy panels.
pub const FIG3_ETA2: [f64; 4] = [0.5, 1.0, 2.0, 3.0];
/// Step sizes compared in the trajectory-convergence study.
pub const FIG5_DT: [f64; 3] = [2e-4, 5e-4, 1e-3];
/// Horizon of the long-time continuation.
pub const FIG5_LONG_T_MAX: f64 = 10.0;

/// Parameter set of the rate and concurrence studies (`p = 100`).
pub fn fig2_params() -> SystemParams {
    SystemParams { drive: 100.0, ..SystemParams::default() }
}

/// Parameter set of the trajectory-convergence studies.
pub fn fig5_params() -> SystemParams {
    SystemParams { g: 0.2, ..SystemParams::default() }
}

/// `(λt, γ₀, γ₊, γ₋, γ̃₀)` with the coarse-graining window `T = λt`.
pub fn rate_table(params: &SystemParams, t_max: f64, dt: f64) -> Result<Vec<[f64; 5]>> {
    let sched = build_rate_schedule(params, t_max, dt, true)?;
    let (plus, minus) = (sched.gamma_plus.as_ref().unwrap(), sched.gamma_minus.as_ref().unwrap());
    (0..sched.len())
        .map(|k| {
            let t = sched.t_grid[k];
            Ok([t, sched.gamma0[k], plus[k], minus[k], coarse_grained_gamma0(params, t, t)?])
        })
        .collect()
}

/// RK4 evolution of the master equation, as an observable series.
pub fn rk4_series(params: &SystemParams, rho0: &DensityMatrix4, cfg: &EvolutionConfig) -> Result<ObservableSeries> {
    let ev = evolve(rho0, cfg, params)?;
    let eq = MasterEquation::from_config(*params, cfg);
    let rows = ev
        .times
        .iter()
        .zip(&ev.states)
        .map(|(&t, rho)| {
            let mut row = ObservableRow::from_state(t, eq.gamma0(t), rho)?;
            row.trace_dev = rho.trace() - 1.0;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    ObservableSeries::from_rows(rows)
}

/// Unitary evolution built from the same step propagators as the
/// trajectory and circuit simulators.
pub fn propagator_series(
    params: &SystemParams,
    initial: InitialState,
    dt: f64,
    t_max: f64,
    record_stride: usize,
) -> Result<ObservableSeries> {
    validate_grid_only(dt, t_max, record_stride, params)?;
    let steps = (t_max / dt).round() as usize;
    let mut psi = initial.ket();
    let mut series = ObservableSeries::new();
    series.push(ObservableRow::from_state(0.0, 0.0, &DensityMatrix4::pure(&psi))?)?;
    for k in 0..steps {
        psi = step_propagator(k as f64 * dt, dt, params)? * psi;
        if (k + 1) % record_stride == 0 || k + 1 == steps {
            let t = (k + 1) as f64 * dt;
            series.push(ObservableRow::from_state(t, 0.0, &DensityMatrix4::pure(&psi))?)?;
        }
    }
    Ok(series)
}

fn validate_grid_only(dt: f64, t_max: f64, record_stride: usize, params: &SystemParams) -> Result<()> {
    crate::integrator::validate_grid(dt, 0.0, t_max, record_stride)?;
    params.validate()
}

/// Trajectory run up to the end of the first negative-rate segment on its
/// own grid, then RK4 continuation to `rk4.t_max`. Returns the switch time
/// and the continued series.
pub fn long_time_series(
    params: &SystemParams,
    initial: InitialState,
    history: &NmqjConfig,
    rk4: &EvolutionConfig,
) -> Result<(f64, ObservableSeries)> {
    validate_stepper(history.dt, history.t_max, history.record_stride, params)?;
    let sched = build_rate_schedule(params, history.t_max, history.dt, false)?;
    let end = sched
        .end_of_first_negative()
        .filter(|&e| e < sched.len())
        .ok_or_else(|| Error::invalid("t_max", "history does not contain the end of a negative-rate segment"))?;
    let t_switch = sched.t_grid[end];
    let mut truncated = sched.clone();
    truncated.t_grid.truncate(end + 1);
    truncated.gamma0.truncate(end + 1);
    let cfg = NmqjConfig { record_stride: end.max(1), ..*history };
    let run = nmqj::run_with_schedule(&initial.ket(), params, &truncated, &cfg)?;
    let rho = run.hierarchy.reconstruct_density(false);
    let series = continue_from_temporal_state(&rho, params, t_switch, rk4.t_max, rk4.dt, rk4.record_stride)?;
    Ok((t_switch, series))
}

/// Fails on negative eigenvalues or observables leaving `[0, 1]`.
pub fn monitor(series: &ObservableSeries) -> Result<()> {
    for r in series.rows() {
        if r.min_eig < POSITIVITY_FAIL {
            return Err(Error::PositivityViolation { t: r.lambda_t, min_eig: r.min_eig });
        }
    }
    series.check_bounds()
}

#[derive(Clone, Debug)]
enum Curve {
    Rates { params: SystemParams, t_max: f64, dt: f64 },
    Rk4 { params: SystemParams, evo: EvolutionConfig, initial: InitialState },
    Unitary { params: SystemParams, dt: f64, t_max: f64, record_stride: usize, initial: InitialState },
    Nmqj { params: SystemParams, cfg: NmqjConfig, initial: InitialState },
    Circuit { params: SystemParams, cfg: CircuitConfig, initial: InitialState },
    LongTime { params: SystemParams, history: NmqjConfig, rk4: EvolutionConfig, initial: InitialState },
}

/// One output file.
#[derive(Clone, Debug)]
struct Task {
    scenario: String,
    file: String,
    curve: Curve,
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

fn push(h: &mut Header, key: &str, value: impl ToString) {
    h.push((key.to_string(), value.to_string()));
}

fn param_header(h: &mut Header, p: &SystemParams) {
    push(h, "lambda", fmt_num(SystemParams::LAMBDA));
    push(h, "omega_a", fmt_num(p.omega_a));
    push(h, "omega_b", fmt_num(p.omega_b));
    push(h, "omega_l", fmt_num(p.omega_l));
    push(h, "Omega", fmt_num(p.drive));
    push(h, "p", fmt_num(p.p()));
    push(h, "g", fmt_num(p.g));
    push(h, "eta2", fmt_num(p.eta_sq));
    push(h, "s", fmt_num(p.s));
}

impl Task {
    fn header(&self) -> Header {
        let mut h = Header::new();
        push(&mut h, "scenario", &self.scenario);
        push(&mut h, "curve", self.file.trim_end_matches(".csv"));
        match &self.curve {
            Curve::Rates { params, t_max, dt } => {
                param_header(&mut h, params);
                push(&mut h, "dt", fmt_num(*dt));
                push(&mut h, "t_max", fmt_num(*t_max));
                push(&mut h, "coarse_window", "lambda_t");
            }
            Curve::Rk4 { params, evo, initial } => {
                param_header(&mut h, params);
                push(&mut h, "method", "rk4");
                push(&mut h, "mode", mode_name(evo.mode));
                push(&mut h, "dissipator", dissipator_name(evo.dissipator));
                push(&mut h, "dt", fmt_num(evo.dt));
                push(&mut h, "t_start", fmt_num(evo.t_start));
                push(&mut h, "t_max", fmt_num(evo.t_max));
                push(&mut h, "record_stride", evo.record_stride);
                push(&mut h, "initial", initial);
            }
            Curve::Unitary { params, dt, t_max, record_stride, initial } => {
                param_header(&mut h, params);
                push(&mut h, "method", "step_propagators");
                push(&mut h, "mode", "unitary");
                push(&mut h, "dt", fmt_num(*dt));
                push(&mut h, "t_max", fmt_num(*t_max));
                push(&mut h, "record_stride", record_stride);
                push(&mut h, "initial", initial);
            }
            Curve::Nmqj { params, cfg, initial } => {
                param_header(&mut h, params);
                push(&mut h, "method", "nmqj");
                nmqj_header(&mut h, cfg);
                push(&mut h, "initial", initial);
            }
            Curve::Circuit { params, cfg, initial } => {
                param_header(&mut h, params);
                push(&mut h, "method", "circuit");
                push(&mut h, "dt", fmt_num(cfg.dt));
                push(&mut h, "t_max", fmt_num(cfg.t_max));
                push(&mut h, "shots", cfg.shots);
                push(&mut h, "seed", cfg.seed);
                push(&mut h, "record_stride", cfg.record_stride);
                push(&mut h, "suspension", "suspend_in_negative");
                push(&mut h, "initial", initial);
            }
            Curve::LongTime { params, history, rk4, initial } => {
                param_header(&mut h, params);
                push(&mut h, "method", "nmqj_then_rk4");
                push(&mut h, "history_dt", fmt_num(history.dt));
                push(&mut h, "history_n_max", history.n_max);
                push(&mut h, "history_top_level", top_level_name(history.top_level));
                push(&mut h, "switch_state", "renormalized");
                push(&mut h, "dt", fmt_num(rk4.dt));
                push(&mut h, "t_max", fmt_num(rk4.t_max));
                push(&mut h, "record_stride", rk4.record_stride);
                push(&mut h, "initial", initial);
            }
        }
        h
    }

    fn run(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        let path = out_dir.join(&self.file);
        let mut header = self.header();
        let mut files = vec![path.clone()];
        match &self.curve {
            Curve::Rates { params, t_max, dt } => {
                let table = rate_table(params, *t_max, *dt)?;
                let columns = ["lambda_t", "gamma0", "gamma_plus", "gamma_minus", "gamma0_coarse"];
                write_values(&path, &header, &columns, table.iter().map(|r| r.map(Some).to_vec()))?;
            }
            Curve::Rk4 { params, evo, initial } => {
                let series = rk4_series(params, &DensityMatrix4::pure(&initial.ket()), evo)?;
                monitor(&series)?;
                write_series(&path, &header, &series)?;
            }
            Curve::Unitary { params, dt, t_max, record_stride, initial } => {
                let series = propagator_series(params, *initial, *dt, *t_max, *record_stride)?;
                monitor(&series)?;
                write_series(&path, &header, &series)?;
            }
            Curve::Nmqj { params, cfg, initial } => {
                let run = nmqj::run(&initial.ket(), params, cfg)?;
                monitor(&run.series)?;
                let ledger = run.hierarchy.ledger();
                push(&mut header, "discarded_weight", fmt_num(ledger.discarded));
                push(&mut header, "unsourced_weight", fmt_num(ledger.unsourced));
                push(&mut header, "clamped_weight", fmt_num(ledger.clamped));
                write_series(&path, &header, &run.series)?;
            }
            Curve::Circuit { params, cfg, initial } => {
                let run = run_ensemble(&initial.ket(), params, cfg)?;
                monitor(&run.series)?;
                write_series(&path, &header, &run.series)?;
                let shots_path = out_dir.join(self.file.replace(".csv", "_shots.csv"));
                write_shots(&shots_path, &header, &run.shots)?;
                files.push(shots_path);
            }
            Curve::LongTime { params, history, rk4, initial } => {
                let (t_switch, series) = long_time_series(params, *initial, history, rk4)?;
                monitor(&series)?;
                push(&mut header, "t_switch", fmt_num(t_switch));
                write_series(&path, &header, &series)?;
            }
        }
        log::info!("wrote {}", path.display());
        Ok(files)
    }
}

fn nmqj_header(h: &mut Header, cfg: &NmqjConfig) {
    push(h, "dt", fmt_num(cfg.dt));
    push(h, "t_max", fmt_num(cfg.t_max));
    push(h, "n_max", cfg.n_max);
    push(h, "renormalize", cfg.renormalize);
    push(h, "top_level", top_level_name(cfg.top_level));
    push(h, "record_stride", cfg.record_stride);
}

/// Record stride giving roughly `spacing` between rows.
fn stride_for(dt: f64, spacing: f64) -> usize {
    ((spacing / dt).round() as usize).max(1)
}

fn dt_label(dt: f64) -> String {
    format!("{dt:e}")
}

fn scenario_tasks(name: &str, cfg: &RunConfig) -> Result<Vec<Task>> {
    let task = |file: String, curve: Curve| Task { scenario: name.to_string(), file, curve };
    let tasks = match name {
        "fig2_rates" => {
            let params = cfg.params(fig2_params())?;
            vec![task(
                "fig2_rates.csv".into(),
                Curve::Rates { params, t_max: cfg.t_max.unwrap_or(4.0), dt: cfg.dt.unwrap_or(1e-3) },
            )]
        }
        "fig2_concurrence" => {
            let params = cfg.params(SystemParams { g: 0.0, ..fig2_params() })?;
            let evo = cfg.evolution(EvolutionConfig { t_max: 4.0, record_stride: 10, ..Default::default() });
            let initial = cfg.initial_state(InitialState::Bell);
            vec![task("fig2_concurrence.csv".into(), Curve::Rk4 { params, evo, initial })]
        }
        "fig3_ergotropy" => {
            let etas = cfg.eta_sq.map(|e| vec![e]).unwrap_or_else(|| FIG3_ETA2.to_vec());
            let modes = match cfg.mode {
                Some(m) => vec![m],
                None => vec![Mode::NonMarkovian, Mode::MarkovianAsymptotic, Mode::Unitary],
            };
            let initial = cfg.initial_state(InitialState::UpYDown);
            let mut tasks = Vec::new();
            for &eta_sq in &etas {
                let params = cfg.params(SystemParams { eta_sq, ..SystemParams::default() })?;
                for &mode in &modes {
                    let evo = cfg.evolution(EvolutionConfig { record_stride: 10, ..Default::default() });
                    let evo = EvolutionConfig { mode, ..evo };
                    let case = match mode {
                        Mode::NonMarkovian => "case_i",
                        Mode::MarkovianAsymptotic => "case_ii",
                        Mode::Unitary => "case_iii",
                    };
                    tasks.push(task(
                        format!("fig3_eta2_{}_{case}.csv", fmt_num(eta_sq)),
                        Curve::Rk4 { params, evo, initial },
                    ));
                }
            }
            tasks
        }
        "fig4_weights" => {
            let params = cfg.params(SystemParams::default())?;
            let initial = cfg.initial_state(InitialState::UpYDown);
            let base = cfg.nmqj(NmqjConfig { renormalize: true, record_stride: 2, ..Default::default() });
            let levels = cfg.n_max.map(|n| vec![n]).unwrap_or_else(|| vec![0, 1, 2]);
            let mut tasks: Vec<Task> = levels
                .into_iter()
                .map(|n_max| {
                    task(
                        format!("fig4_nmax_{n_max}.csv"),
                        Curve::Nmqj { params, cfg: NmqjConfig { n_max, ..base }, initial },
                    )
                })
                .collect();
            tasks.push(task(
                "fig4_unitary.csv".into(),
                Curve::Unitary { params, dt: base.dt, t_max: base.t_max, record_stride: base.record_stride, initial },
            ));
            let evo =
                cfg.evolution(EvolutionConfig { dt: base.dt, record_stride: base.record_stride, ..Default::default() });
            tasks.push(task(
                "fig4_rk4.csv".into(),
                Curve::Rk4 { params, evo: EvolutionConfig { mode: Mode::NonMarkovian, ..evo }, initial },
            ));
            tasks
        }
        "fig5_earlystage" => {
            let params = cfg.params(fig5_params())?;
            let initial = cfg.initial_state(InitialState::UpYDown);
            let dts = cfg.dt.map(|d| vec![d]).unwrap_or_else(|| FIG5_DT.to_vec());
            let mut tasks: Vec<Task> = dts
                .iter()
                .map(|&dt| {
                    let c = cfg.nmqj(NmqjConfig { dt, record_stride: stride_for(dt, 1e-3), ..Default::default() });
                    task(
                        format!("fig5_early_dt_{}.csv", dt_label(dt)),
                        Curve::Nmqj { params, cfg: NmqjConfig { dt, ..c }, initial },
                    )
                })
                .collect();
            let evo = cfg.evolution(EvolutionConfig { record_stride: 5, ..Default::default() });
            tasks.push(task(
                "fig5_early_rk4.csv".into(),
                Curve::Rk4 { params, evo: EvolutionConfig { mode: Mode::NonMarkovian, ..evo }, initial },
            ));
            let circuit_dt = *dts.last().unwrap();
            let c = cfg.circuit(CircuitConfig { dt: circuit_dt, ..Default::default() });
            tasks.push(task(
                format!("fig5_early_circuit_dt_{}.csv", dt_label(circuit_dt)),
                Curve::Circuit { params, cfg: c, initial },
            ));
            tasks
        }
        "fig5_longtime" => {
            let params = cfg.params(fig5_params())?;
            let initial = cfg.initial_state(InitialState::UpYDown);
            let dts = cfg.dt.map(|d| vec![d]).unwrap_or_else(|| FIG5_DT.to_vec());
            let rk4 = EvolutionConfig {
                dt: 2e-4,
                t_max: cfg.t_max.unwrap_or(FIG5_LONG_T_MAX),
                record_stride: cfg.record_stride.unwrap_or(50),
                ..Default::default()
            };
            dts.iter()
                .map(|&dt| {
                    let history = NmqjConfig { dt, t_max: 1.2, ..cfg.nmqj(NmqjConfig::default()) };
                    task(
                        format!("fig5_long_dt_{}.csv", dt_label(dt)),
                        Curve::LongTime { params, history, rk4, initial },
                    )
                })
                .collect()
        }
        _ => return Err(Error::UnknownScenario { name: name.to_string(), valid: SCENARIOS.to_vec() }),
    };
    Ok(tasks)
}

fn execute(tasks: Vec<Task>, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let jobs = cfg.jobs.unwrap_or(1);
    let run_all = || -> Result<Vec<PathBuf>> {
        let nested: Vec<Vec<PathBuf>> = if jobs > 1 {
            tasks.par_iter().map(|t| t.run(out_dir)).collect::<Result<_>>()?
        } else {
            tasks.iter().map(|t| t.run(out_dir)).collect::<Result<_>>()?
        };
        Ok(nested.into_iter().flatten().collect())
    };
    match cfg.jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::invalid("jobs", e.to_string()))?
            .install(run_all),
        None => run_all(),
    }
}

/// Runs a named scenario and returns the files written.
pub fn run_scenario(name: &str, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let tasks = scenario_tasks(name, cfg)?;
    execute(tasks, cfg, out_dir)
}

/// Single-curve commands driven only by the configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Rates,
    Evolve,
    Nmqj,
    Circuit,
}

pub fn run_command(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let params = cfg.params(SystemParams::default())?;
    let initial = cfg.initial_state(InitialState::UpYDown);
    let (file, curve) = match command {
        Command::Rates => {
            ("rates.csv", Curve::Rates { params, t_max: cfg.t_max.unwrap_or(4.0), dt: cfg.dt.unwrap_or(1e-3) })
        }
        Command::Evolve => {
            ("evolve.csv", Curve::Rk4 { params, evo: cfg.evolution(EvolutionConfig::default()), initial })
        }
        Command::Nmqj => ("nmqj.csv", Curve::Nmqj { params, cfg: cfg.nmqj(NmqjConfig::default()), initial }),
        Command::Circuit => {
            ("circuit.csv", Curve::Circuit { params, cfg: cfg.circuit(CircuitConfig::default()), initial })
        }
    };
    let name = match command {
        Command::Rates => "rates",
        Command::Evolve => "evolve",
        Command::Nmqj => "nmqj",
        Command::Circuit => "circuit",
    };
    execute(vec![Task { scenario: name.to_string(), file: file.to_string(), curve }], cfg, out_dir)
}
