//! Stochastic circuit realization of the dephasing dynamics: each cycle
//! applies a random local flip `σˣ_A` with probability `γ₀dt`, then the
//! cycle unitary. Flips are suspended while `γ₀ < 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{evolve, propagator_table, validate_stepper, EvolutionConfig, Mode};
use crate::model::{build_rate_schedule, gamma0_of_t, RateSchedule, RateSign, SystemParams};
use crate::nmqj::jump_operator;
use crate::observables::{concurrence, energy_fraction, ergotropy_fraction, ObservableRow, ObservableSeries};
use crate::qmath::{DensityMatrix4, Ket4, Mat4};

/// Largest number of batches used for the standard-error estimate.
pub const MAX_BATCHES: usize = 32;

/// What happens to local operations while the rate is negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SuspensionPolicy {
    #[default]
    SuspendInNegative,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitConfig {
    /// Cycle time.
    pub dt: f64,
    pub t_max: f64,
    pub shots: usize,
    pub seed: u64,
    pub record_stride: usize,
    pub suspension: SuspensionPolicy,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        CircuitConfig {
            dt: 1e-3,
            t_max: 1.2,
            shots: 10_000,
            seed: 0,
            record_stride: 1,
            suspension: SuspensionPolicy::SuspendInNegative,
        }
    }
}

impl CircuitConfig {
    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::invalid("shots", "must be >= 1"));
        }
        validate_stepper(self.dt, self.t_max, self.record_stride, params)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShotRecord {
    pub shot: usize,
    pub jump_times: Vec<f64>,
    pub final_state: Ket4,
}

impl ShotRecord {
    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }

    pub fn first_jump_time(&self) -> Option<f64> {
        self.jump_times.first().copied()
    }
}

/// Independent random stream of one shot.
pub fn shot_rng(seed: u64, shot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot as u64);
    rng
}

/// Schedule and cycle unitaries shared by all shots.
#[derive(Clone, Debug)]
pub struct CircuitPlan {
    pub schedule: RateSchedule,
    pub unitaries: Vec<Mat4>,
}

impl CircuitPlan {
    pub fn new(params: &SystemParams, cfg: &CircuitConfig) -> Result<Self> {
        cfg.validate(params)?;
        let schedule = build_rate_schedule(params, cfg.t_max, cfg.dt, false)?;
        Self::with_schedule(params, schedule)
    }

    /// Uses an arbitrary rate schedule with the model's unitaries.
    pub fn with_schedule(params: &SystemParams, schedule: RateSchedule) -> Result<Self> {
        let cycles = schedule.len().saturating_sub(1);
        for k in 0..cycles {
            let probability = schedule.gamma0[k] * schedule.dt;
            if probability >= 1.0 {
                return Err(Error::StepTooCoarse { step: k, t: schedule.t_grid[k], probability });
            }
        }
        let unitaries = propagator_table(0.0, schedule.dt, cycles, params)?;
        Ok(CircuitPlan { schedule, unitaries })
    }

    pub fn cycles(&self) -> usize {
        self.unitaries.len()
    }

    fn simulate(&self, psi0: &Ket4, seed: u64, shot: usize, mut visit: impl FnMut(usize, &Ket4)) -> ShotRecord {
        let mut rng = shot_rng(seed, shot);
        let x = jump_operator();
        let mut psi = *psi0;
        let mut jump_times = Vec::new();
        visit(0, &psi);
        for (k, u) in self.unitaries.iter().enumerate() {
            let gamma0 = self.schedule.gamma0[k];
            if RateSign::of(gamma0) == RateSign::NonNegative && gamma0 > 0.0 {
                let draw: f64 = rng.random();
                if draw < gamma0 * self.schedule.dt {
                    psi = x * psi;
                    jump_times.push(self.schedule.t_grid[k]);
                }
            }
            psi = *u * psi;
            visit(k + 1, &psi);
        }
        ShotRecord { shot, jump_times, final_state: psi }
    }

    pub fn run_shot(&self, psi0: &Ket4, seed: u64, shot: usize) -> ShotRecord {
        self.simulate(psi0, seed, shot, |_, _| {})
    }
}

/// Ensemble average and per-shot records.
#[derive(Clone, Debug)]
pub struct EnsembleRun {
    pub times: Vec<f64>,
    pub rho_avg: Vec<DensityMatrix4>,
    pub series: ObservableSeries,
    pub shots: Vec<ShotRecord>,
}

fn recorded(k: usize, cycles: usize, stride: usize) -> bool {
    k.is_multiple_of(stride) || k == cycles
}

fn sample_std_error(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

/// Runs `cfg.shots` shots in parallel batches and averages the projectors.
///
/// Shots are split into up to [`MAX_BATCHES`] contiguous batches; the
/// batch sums are reduced in batch order, and standard errors come from the
/// spread of the batch averages.
pub fn run_ensemble(psi0: &Ket4, params: &SystemParams, cfg: &CircuitConfig) -> Result<EnsembleRun> {
    let plan = CircuitPlan::new(params, cfg)?;
    run_ensemble_with_plan(psi0, &plan, cfg)
}

pub fn run_ensemble_with_plan(psi0: &Ket4, plan: &CircuitPlan, cfg: &CircuitConfig) -> Result<EnsembleRun> {
    if cfg.shots == 0 {
        return Err(Error::invalid("shots", "must be >= 1"));
    }
    if cfg.record_stride == 0 {
        return Err(Error::invalid("record_stride", "must be >= 1"));
    }
    let cycles = plan.cycles();
    let record_idx: Vec<usize> = (0..=cycles).filter(|&k| recorded(k, cycles, cfg.record_stride)).collect();
    let batches = cfg.shots.min(MAX_BATCHES);
    let bounds = |b: usize| (b * cfg.shots / batches, (b + 1) * cfg.shots / batches);

    let partial: Vec<(Vec<Mat4>, Vec<ShotRecord>)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let (lo, hi) = bounds(b);
            let mut sums = vec![Mat4::zeros(); record_idx.len()];
            let mut records = Vec::with_capacity(hi - lo);
            for shot in lo..hi {
                let mut slot = 0;
                let rec = plan.simulate(psi0, cfg.seed, shot, |k, psi| {
                    if recorded(k, cycles, cfg.record_stride) {
                        sums[slot] += psi.projector(1.0);
                        slot += 1;
                    }
                });
                records.push(rec);
            }
            (sums, records)
        })
        .collect();

    let n = cfg.shots as f64;
    let mut series = ObservableSeries::new();
    let mut rho_avg = Vec::with_capacity(record_idx.len());
    let mut times = Vec::with_capacity(record_idx.len());
    for (slot, &k) in record_idx.iter().enumerate() {
        let mut total = Mat4::zeros();
        for (sums, _) in &partial {
            total += sums[slot];
        }
        let rho = DensityMatrix4::from_matrix_unchecked(total.scale_real(1.0 / n).hermitian_part());
        let t = plan.schedule.t_grid[k];
        let mut row = ObservableRow::from_state(t, plan.schedule.gamma0[k], &rho)?;
        row.trace_dev = rho.trace() - 1.0;
        if batches >= 2 {
            let mut e = Vec::with_capacity(batches);
            let mut w = Vec::with_capacity(batches);
            let mut c = Vec::with_capacity(batches);
            for (b, (sums, _)) in partial.iter().enumerate() {
                let (lo, hi) = bounds(b);
                let rho_b = DensityMatrix4::from_matrix_unchecked(sums[slot].scale_real(1.0 / (hi - lo) as f64));
                e.push(energy_fraction(&rho_b));
                w.push(ergotropy_fraction(&rho_b));
                c.push(concurrence(&rho_b)?);
            }
            row.energy_se = Some(sample_std_error(&e));
            row.ergotropy_se = Some(sample_std_error(&w));
            row.concurrence_se = Some(sample_std_error(&c));
        }
        series.push(row)?;
        rho_avg.push(rho);
        times.push(t);
    }
    let shots = partial.into_iter().flat_map(|(_, r)| r).collect();
    Ok(EnsembleRun { times, rho_avg, series, shots })
}

/// Continues the master-equation evolution from a state prepared up to
/// `t_switch`, which must not lie where `γ₀ < 0`. The state is rescaled to
/// unit trace first.
pub fn continue_from_temporal_state(
    rho_at_switch: &DensityMatrix4,
    params: &SystemParams,
    t_switch: f64,
    t_max: f64,
    dt: f64,
    record_stride: usize,
) -> Result<ObservableSeries> {
    let gamma0 = gamma0_of_t(params, t_switch);
    if RateSign::of(gamma0) == RateSign::Negative {
        return Err(Error::SwitchInsideNegativeSegment { t_switch, gamma0 });
    }
    let cfg =
        EvolutionConfig { dt, t_start: t_switch, t_max, mode: Mode::NonMarkovian, record_stride, ..Default::default() };
    let start = rho_at_switch.renormalized();
    let ev = evolve(&start, &cfg, params)?;
    let rows = ev
        .times
        .iter()
        .zip(&ev.states)
        .map(|(&t, rho)| ObservableRow::from_state(t, gamma0_of_t(params, t), rho))
        .collect::<Result<Vec<_>>>()?;
    ObservableSeries::from_rows(rows)
}
