//! Deterministic non-Markovian quantum-jump unraveling of the dephasing
//! master equation.
//!
//! The hierarchy keeps the no-jump branch, one pure branch per single-jump
//! time and, for each of those, an aggregated density contribution of all
//! its two-jump daughters. Positive-rate steps move weight downwards by
//! normal jumps; negative-rate steps move it back up by reversed jumps into
//! the mother's current state.
//!
//! Every branch evolves under the same unitary between jumps, so states are
//! stored in the interaction picture `ψ̃ = F(t)† ψ(t)`, where `F(t)` is the
//! accumulated propagator. Jumps then act through `W = F† X F`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{step_propagator, validate_stepper};
use crate::model::{build_rate_schedule, sigma_x_charger, RateSchedule, RateSign, SystemParams};
use crate::observables::{ObservableRow, ObservableSeries};
use crate::qmath::{DensityMatrix4, Ket4, Mat4};

/// Cumulative clamped weight above which a run fails.
pub const CLAMP_LIMIT: f64 = 1e-6;

/// Highest supported number of jumps per branch.
pub const MAX_LEVEL: usize = 2;

const PAR_MIN_ENTRIES: usize = 512;

/// The jump operator `σˣ_A ⊗ 𝟙`, unitary and self-inverse.
pub fn jump_operator() -> Mat4 {
    sigma_x_charger()
}

/// Reversed-jump bookkeeping at the truncation level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TopLevelGain {
    /// The top level has no daughters and gains nothing. Total weight is
    /// conserved whenever the daughters can supply the requested transfers.
    #[default]
    Conserving,
    /// Every level, including the top one, gains `|γ₀|dt` times its weight.
    /// Weight pushed below zero is clamped and counted towards
    /// [`CLAMP_LIMIT`].
    Literal,
}

/// One single-jump branch and the aggregate of its two-jump daughters.
#[derive(Clone, Debug, PartialEq)]
pub struct Level1Entry {
    /// Time at which the jump happened.
    pub t1: f64,
    psi: Ket4,
    pub k1: f64,
    sigma2: Mat4,
    pub k2: f64,
}

/// Weight that left the tracked hierarchy or entered it without a source.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeightLedger {
    /// Lost through jumps out of the top level.
    pub discarded: f64,
    /// Reversed-jump requests the daughters could not cover (conserving
    /// variant); this weight is not transferred.
    pub unsourced: f64,
    /// Same shortfall in the literal variant.
    pub clamped: f64,
}

#[derive(Clone, Debug)]
pub struct TrajectoryHierarchy {
    n_max: usize,
    top_level: TopLevelGain,
    frame: Mat4,
    psi0: Ket4,
    k0: f64,
    level1: Vec<Level1Entry>,
    steps: usize,
    ledger: WeightLedger,
}

/// Starts every weight in the no-jump branch.
pub fn init_hierarchy(psi0: &Ket4, n_max: usize) -> Result<TrajectoryHierarchy> {
    if n_max > MAX_LEVEL {
        return Err(Error::UnsupportedTruncation(n_max));
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::invalid("psi0", format!("must be normalized, norm = {norm}")));
    }
    Ok(TrajectoryHierarchy {
        n_max,
        top_level: TopLevelGain::Conserving,
        frame: Mat4::identity(),
        psi0: *psi0,
        k0: 1.0,
        level1: Vec::new(),
        steps: 0,
        ledger: WeightLedger::default(),
    })
}

fn for_each_entry(entries: &mut [Level1Entry], f: impl Fn(&mut Level1Entry) + Sync + Send) {
    if entries.len() >= PAR_MIN_ENTRIES {
        entries.par_iter_mut().with_min_len(PAR_MIN_ENTRIES / 4).for_each(f);
    } else {
        entries.iter_mut().for_each(f);
    }
}

impl TrajectoryHierarchy {
    pub fn with_top_level(mut self, top_level: TopLevelGain) -> Self {
        self.top_level = top_level;
        self
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn k1_sum(&self) -> f64 {
        self.level1.iter().map(|e| e.k1).sum()
    }

    pub fn k2_sum(&self) -> f64 {
        self.level1.iter().map(|e| e.k2).sum()
    }

    pub fn k_total(&self) -> f64 {
        self.k0 + self.k1_sum() + self.k2_sum()
    }

    pub fn level1(&self) -> &[Level1Entry] {
        &self.level1
    }

    pub fn ledger(&self) -> WeightLedger {
        self.ledger
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Accumulated propagator `F(t)`.
    pub fn frame(&self) -> &Mat4 {
        &self.frame
    }

    /// Current no-jump state.
    pub fn level0_state(&self) -> Ket4 {
        self.frame * self.psi0
    }

    /// Current state of the `i`-th single-jump branch.
    pub fn level1_state(&self, i: usize) -> Ket4 {
        self.frame * self.level1[i].psi
    }

    /// Current two-jump aggregate under the `i`-th mother; its trace is `k2`.
    pub fn level2_aggregate(&self, i: usize) -> Mat4 {
        self.frame.sandwich(&self.level1[i].sigma2)
    }

    fn check_probability(&self, t: f64, probability: f64) -> Result<()> {
        if !(0.0..1.0).contains(&probability) {
            return Err(Error::StepTooCoarse { step: self.steps, t, probability });
        }
        Ok(())
    }

    /// Normal jumps with probability `γ₀dt`, then free evolution by `u`.
    pub fn step_positive(&mut self, t: f64, dt: f64, gamma0: f64, u: &Mat4) -> Result<()> {
        if RateSign::of(gamma0) != RateSign::NonNegative {
            return Err(Error::WrongRateSign { step: self.steps, expected: "non-negative", gamma0 });
        }
        let p = (gamma0 * dt).max(0.0);
        self.check_probability(t, p)?;
        let x = jump_operator();
        let w = self.frame.adjoint() * x * self.frame;
        let k0 = self.k0;

        match self.n_max {
            0 => self.ledger.discarded += p * k0,
            1 => {
                self.ledger.discarded += p * self.k1_sum();
                for_each_entry(&mut self.level1, |e| e.k1 *= 1.0 - p);
            }
            _ => {
                self.ledger.discarded += p * self.k2_sum();
                for_each_entry(&mut self.level1, |e| {
                    let jumped = w * e.psi;
                    e.sigma2 = e.sigma2.scale_real(1.0 - p) + jumped.projector(p * e.k1);
                    e.k2 = e.k2 * (1.0 - p) + p * e.k1;
                    e.k1 *= 1.0 - p;
                });
            }
        }
        if self.n_max >= 1 && p > 0.0 {
            self.level1.push(Level1Entry { t1: t, psi: w * self.psi0, k1: p * k0, sigma2: Mat4::zeros(), k2: 0.0 });
        }
        self.k0 = k0 * (1.0 - p);
        self.advance(u);
        Ok(())
    }

    /// Free evolution by `u`, then reversed jumps with `|γ₀|dt`.
    pub fn step_negative(&mut self, t: f64, dt: f64, gamma0: f64, u: &Mat4) -> Result<()> {
        if RateSign::of(gamma0) != RateSign::Negative {
            return Err(Error::WrongRateSign { step: self.steps, expected: "negative", gamma0 });
        }
        let a = -gamma0 * dt;
        self.check_probability(t, a)?;
        self.advance(u);

        match self.top_level {
            TopLevelGain::Conserving => {
                let shortfall = self.reverse_saturating(a);
                self.ledger.unsourced += shortfall;
            }
            TopLevelGain::Literal => {
                let shortfall = self.reverse_literal(a);
                if shortfall > 0.0 {
                    self.ledger.clamped += shortfall;
                    log::debug!("step {}: clamped {shortfall:.3e}", self.steps);
                    if self.ledger.clamped > CLAMP_LIMIT {
                        return Err(Error::WeightClamp { total: self.ledger.clamped });
                    }
                }
            }
        }
        Ok(())
    }

    /// Each level below the top asks for `a` times its weight from its
    /// daughters, who give it up in proportion to their own weights but never
    /// more than they hold. Returns the part of the requests left unmet.
    fn reverse_saturating(&mut self, a: f64) -> f64 {
        if self.n_max == 0 {
            return 0.0;
        }
        let want0 = a * self.k0;
        let k1_sum = self.k1_sum();
        let gain0 = want0.min(k1_sum);
        let keep1 = if k1_sum > 0.0 { 1.0 - gain0 / k1_sum } else { 1.0 };
        self.k0 += gain0;
        let mut shortfall = want0 - gain0;
        let with_level2 = self.n_max >= 2;
        for e in &mut self.level1 {
            let mut k1 = e.k1 * keep1;
            if with_level2 {
                let want = a * e.k1;
                let gain = want.min(e.k2);
                shortfall += want - gain;
                let k2 = e.k2 - gain;
                e.sigma2 = if e.k2 > 0.0 { e.sigma2.scale_real(k2 / e.k2) } else { Mat4::zeros() };
                e.k2 = k2;
                k1 += gain;
            }
            e.k1 = k1;
        }
        shortfall
    }

    /// Applies `K_n ← K_n(1 + a) − a K_{n−1}·(share of the mother)` at every
    /// level, clamping negative results to zero. Returns the clamped amount.
    fn reverse_literal(&mut self, a: f64) -> f64 {
        let k0 = self.k0;
        let k1_sum = self.k1_sum();
        let n_max = self.n_max;
        self.k0 += a * k0;
        let mut clamped = 0.0;
        if n_max >= 1 && k1_sum <= 0.0 {
            clamped += a * k0;
        }
        let release = if k1_sum > 0.0 { a * k0 / k1_sum } else { 0.0 };
        let mut clamp = |w: f64| {
            if w < 0.0 {
                clamped -= w;
                0.0
            } else {
                w
            }
        };
        for e in &mut self.level1 {
            let k1 = e.k1;
            e.k1 = clamp(k1 * (1.0 + a - release));
            if n_max >= 2 {
                let k2 = clamp(e.k2 * (1.0 + a) - a * k1);
                e.sigma2 = if e.k2 > 0.0 { e.sigma2.scale_real(k2 / e.k2) } else { Mat4::zeros() };
                e.k2 = k2;
            }
        }
        clamped
    }

    fn advance(&mut self, u: &Mat4) {
        self.frame = *u * self.frame;
        self.steps += 1;
    }

    /// `K₀|ψ₀⟩⟨ψ₀| + Σ K₁|ψ₁⟩⟨ψ₁| + Σ σ₂`, optionally divided by its trace.
    pub fn reconstruct_density(&self, renormalize: bool) -> DensityMatrix4 {
        let mut acc = self.psi0.projector(self.k0);
        for e in &self.level1 {
            acc += e.psi.projector(e.k1);
            acc += e.sigma2;
        }
        let rho = DensityMatrix4::from_matrix_unchecked(self.frame.sandwich(&acc).hermitian_part());
        if renormalize {
            rho.renormalized()
        } else {
            rho
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmqjConfig {
    pub dt: f64,
    pub t_max: f64,
    pub n_max: usize,
    pub record_stride: usize,
    pub renormalize: bool,
    pub top_level: TopLevelGain,
}

impl Default for NmqjConfig {
    fn default() -> Self {
        NmqjConfig {
            dt: 5e-4,
            t_max: 1.2,
            n_max: 2,
            record_stride: 1,
            renormalize: false,
            top_level: TopLevelGain::Conserving,
        }
    }
}

pub struct NmqjRun {
    pub series: ObservableSeries,
    pub hierarchy: TrajectoryHierarchy,
}

/// Unravels the dephasing dynamics with the time-dependent `γ₀(t)`.
pub fn run(psi0: &Ket4, params: &SystemParams, cfg: &NmqjConfig) -> Result<NmqjRun> {
    validate_stepper(cfg.dt, cfg.t_max, cfg.record_stride, params)?;
    let schedule = build_rate_schedule(params, cfg.t_max, cfg.dt, false)?;
    run_with_schedule(psi0, params, &schedule, cfg)
}

/// Same as [`run`] with an arbitrary rate schedule; the horizon is the
/// schedule's last grid point.
pub fn run_with_schedule(
    psi0: &Ket4,
    params: &SystemParams,
    schedule: &RateSchedule,
    cfg: &NmqjConfig,
) -> Result<NmqjRun> {
    if cfg.record_stride == 0 {
        return Err(Error::invalid("record_stride", "must be >= 1"));
    }
    let mut h = init_hierarchy(psi0, cfg.n_max)?.with_top_level(cfg.top_level);
    let dt = schedule.dt;
    let steps = schedule.len().saturating_sub(1);
    let mut series = ObservableSeries::new();
    let record = |h: &TrajectoryHierarchy, k: usize, series: &mut ObservableSeries| -> Result<()> {
        let rho = h.reconstruct_density(cfg.renormalize);
        let mut row = ObservableRow::from_state(schedule.t_grid[k], schedule.gamma0[k], &rho)?;
        let (k0, k1, k2) = (h.k0(), h.k1_sum(), h.k2_sum());
        row.k0 = Some(k0);
        row.k1_sum = Some(k1);
        row.k2_sum = Some(k2);
        row.k_total = Some(k0 + k1 + k2);
        row.trace_dev = rho.trace() - 1.0;
        series.push(row)
    };
    record(&h, 0, &mut series)?;
    for k in 0..steps {
        let t = schedule.t_grid[k];
        let gamma0 = schedule.gamma0[k];
        let u = step_propagator(t, dt, params)?;
        match schedule.sign_at(k) {
            RateSign::NonNegative => h.step_positive(t, dt, gamma0, &u)?,
            RateSign::Negative => h.step_negative(t, dt, gamma0, &u)?,
        }
        if (k + 1) % cfg.record_stride == 0 || k + 1 == steps {
            record(&h, k + 1, &mut series)?;
        }
    }
    let ledger = h.ledger();
    if ledger.unsourced > 0.0 {
        log::warn!("reversed jumps found {:.3e} of weight missing in emptied daughters", ledger.unsourced);
    }
    Ok(NmqjRun { series, hierarchy: h })
}
