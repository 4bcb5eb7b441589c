//! Fixed-step RK4 integration of the time-local master equation, and the
//! per-step unitary propagators shared with the trajectory and circuit
//! simulators.

use crate::error::{Error, Result};
use crate::model::{
    dissipator_dephasing, dissipator_secular_full, gamma0_of_t, hamiltonian_corotating, hamiltonian_h0, hamiltonian_h1,
    SecularRates, SystemParams,
};
use crate::qmath::{expm_hermitian_scaled, DensityMatrix4, Mat4, C64, I};

/// Largest allowed `dt·ω_L` when the exchange phase has to be resolved.
pub const MAX_PHASE_STEP: f64 = 0.05;

pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
pub const POSITIVITY_WARN: f64 = -1e-7;
pub const POSITIVITY_FAIL: f64 = -1e-4;

/// Which dephasing rate drives the dissipator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Time-dependent `γ₀(t)`.
    #[default]
    NonMarkovian,
    /// Constant `γ₀(∞)`.
    MarkovianAsymptotic,
    /// No dissipator.
    Unitary,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DissipatorKind {
    #[default]
    DephasingOnly,
    FullSecular,
}

/// Reference frame of the battery.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Frame {
    /// Only the charger rotates with the drive; the exchange term carries
    /// `e^{iω_L t}`.
    #[default]
    Rotating,
    /// The battery rotates at `ω_L` as well; the Hamiltonian is static.
    CoRotating,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_start: f64,
    pub t_max: f64,
    pub mode: Mode,
    pub dissipator: DissipatorKind,
    pub frame: Frame,
    pub record_stride: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            dt: 2e-4,
            t_start: 0.0,
            t_max: 1.2,
            mode: Mode::NonMarkovian,
            dissipator: DissipatorKind::DephasingOnly,
            frame: Frame::Rotating,
            record_stride: 1,
        }
    }
}

impl EvolutionConfig {
    pub fn steps(&self) -> usize {
        ((self.t_max - self.t_start) / self.dt).round() as usize
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        validate_grid(self.dt, self.t_start, self.t_max, self.record_stride)?;
        // the e^{iω_L t} phase is only present with a non-zero exchange term
        if self.frame == Frame::Rotating && params.g != 0.0 && self.dt * params.omega_l > MAX_PHASE_STEP + 1e-12 {
            return Err(Error::invalid(
                "dt",
                format!("dt * omega_l = {} exceeds {MAX_PHASE_STEP}", self.dt * params.omega_l),
            ));
        }
        params.validate()?;
        if self.mode != Mode::Unitary {
            params.check_resonant()?;
        }
        Ok(())
    }
}

/// Checks a time grid `t_start..t_max` with step `dt`.
pub fn validate_grid(dt: f64, t_start: f64, t_max: f64, record_stride: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(t_max > t_start && t_start >= 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max", format!("need 0 <= t_start < t_max, got {t_start} .. {t_max}")));
    }
    if record_stride == 0 {
        return Err(Error::invalid("record_stride", "must be >= 1"));
    }
    Ok(())
}

/// Validation for the propagator-based simulators. The per-step unitaries
/// are exact for the sampled Hamiltonian, so coarse steps are allowed.
pub fn validate_stepper(dt: f64, t_max: f64, record_stride: usize, params: &SystemParams) -> Result<()> {
    validate_grid(dt, 0.0, t_max, record_stride)?;
    params.validate()?;
    params.check_resonant()
}

/// Right-hand side `−i[Ĥ₀ + Ĥ₁(t), ρ] + 𝒟[ρ]` of the master equation.
#[derive(Clone, Copy, Debug)]
pub struct MasterEquation {
    pub params: SystemParams,
    pub mode: Mode,
    pub dissipator: DissipatorKind,
    pub frame: Frame,
}

impl MasterEquation {
    pub fn new(params: SystemParams, mode: Mode) -> Self {
        MasterEquation { params, mode, dissipator: DissipatorKind::DephasingOnly, frame: Frame::Rotating }
    }

    pub fn from_config(params: SystemParams, cfg: &EvolutionConfig) -> Self {
        MasterEquation { params, mode: cfg.mode, dissipator: cfg.dissipator, frame: cfg.frame }
    }

    pub fn hamiltonian(&self, t: f64) -> Mat4 {
        hamiltonian(&self.params, self.frame, t)
    }

    pub fn rates(&self, t: f64) -> SecularRates {
        let full = self.dissipator == DissipatorKind::FullSecular;
        let mut r = match self.mode {
            Mode::NonMarkovian => SecularRates::at(&self.params, t),
            Mode::MarkovianAsymptotic => SecularRates::asymptotic(&self.params),
            Mode::Unitary => SecularRates::default(),
        };
        if !full {
            r.plus = 0.0;
            r.minus = 0.0;
        }
        r
    }

    /// Dephasing rate applied at time `t`.
    pub fn gamma0(&self, t: f64) -> f64 {
        match self.mode {
            Mode::NonMarkovian => gamma0_of_t(&self.params, t),
            Mode::MarkovianAsymptotic => self.params.gamma0_asymptotic(),
            Mode::Unitary => 0.0,
        }
    }

    pub fn rhs(&self, t: f64, rho: &Mat4) -> Mat4 {
        let h = self.hamiltonian(t);
        let unitary = (h * *rho - *rho * h).scale(-I);
        let d = match (self.mode, self.dissipator) {
            (Mode::Unitary, _) => return unitary,
            (_, DissipatorKind::DephasingOnly) => dissipator_dephasing(rho, self.gamma0(t)),
            (_, DissipatorKind::FullSecular) => dissipator_secular_full(rho, self.rates(t)),
        };
        unitary + d
    }

    /// One classic RK4 step from `t` to `t + dt`, followed by
    /// symmetrization.
    pub fn rk4_step(&self, t: f64, dt: f64, rho: &Mat4) -> Mat4 {
        let h2 = dt / 2.0;
        let k1 = self.rhs(t, rho);
        let k2 = self.rhs(t + h2, &(*rho + k1.scale_real(h2)));
        let k3 = self.rhs(t + h2, &(*rho + k2.scale_real(h2)));
        let k4 = self.rhs(t + dt, &(*rho + k3.scale_real(dt)));
        let next = *rho + (k1 + k2.scale_real(2.0) + k3.scale_real(2.0) + k4).scale_real(dt / 6.0);
        next.hermitian_part()
    }
}

/// Total Hamiltonian in the chosen frame.
pub fn hamiltonian(params: &SystemParams, frame: Frame, t: f64) -> Mat4 {
    match frame {
        Frame::Rotating => hamiltonian_h0(params) + hamiltonian_h1(params, t),
        Frame::CoRotating => hamiltonian_corotating(params),
    }
}

/// `exp(−i (Ĥ₀ + Ĥ₁(t + dt/2)) dt)`.
pub fn step_propagator(t: f64, dt: f64, params: &SystemParams) -> Result<Mat4> {
    step_propagator_in(t, dt, params, Frame::Rotating)
}

pub fn step_propagator_in(t: f64, dt: f64, params: &SystemParams, frame: Frame) -> Result<Mat4> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    let h = hamiltonian(params, frame, t + dt / 2.0);
    expm_hermitian_scaled(&h, C64::new(0.0, -dt))
}

/// Propagators for the cycles `t_k = t0 + k·dt`, `k < steps`.
pub fn propagator_table(t0: f64, dt: f64, steps: usize, params: &SystemParams) -> Result<Vec<Mat4>> {
    (0..steps).map(|k| step_propagator(t0 + k as f64 * dt, dt, params)).collect()
}

/// Run summary collected while integrating.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub max_trace_dev: f64,
    pub max_hermiticity_defect: f64,
    pub min_eig: f64,
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix4>,
    pub diagnostics: Diagnostics,
}

impl Evolution {
    pub fn last(&self) -> (f64, &DensityMatrix4) {
        (*self.times.last().unwrap(), self.states.last().unwrap())
    }
}

/// Integrates the master equation from `cfg.t_start` to `cfg.t_max`,
/// recording every `record_stride` steps and the final state.
///
/// The trace is never renormalized: a drift above 1e-6 relative to the
/// initial trace aborts, as does a minimum eigenvalue below −1e-4.
pub fn evolve(rho0: &DensityMatrix4, cfg: &EvolutionConfig, params: &SystemParams) -> Result<Evolution> {
    cfg.validate(params)?;
    let eq = MasterEquation::from_config(*params, cfg);
    let steps = cfg.steps();
    let tr0 = rho0.trace();
    let weight = rho0.weight();

    let mut rho = *rho0.matrix();
    let mut times = Vec::with_capacity(steps / cfg.record_stride + 2);
    let mut states = Vec::with_capacity(times.capacity());
    let mut diag = Diagnostics { min_eig: f64::INFINITY, ..Default::default() };

    let mut record = |k: usize, rho: &Mat4, diag: &mut Diagnostics| -> Result<()> {
        let t = cfg.t_start + k as f64 * cfg.dt;
        let state = DensityMatrix4::from_matrix_unchecked(*rho);
        let drift = state.trace() - tr0;
        if drift.abs() > TRACE_DRIFT_LIMIT {
            return Err(Error::TraceDrift { t, drift });
        }
        let min_eig = state.min_eigenvalue();
        if min_eig < POSITIVITY_FAIL {
            return Err(Error::PositivityViolation { t, min_eig });
        }
        if min_eig < POSITIVITY_WARN {
            log::warn!("lambda t = {t}: minimum eigenvalue {min_eig:.3e}");
        }
        diag.max_trace_dev = diag.max_trace_dev.max((state.trace() - weight).abs());
        diag.min_eig = diag.min_eig.min(min_eig);
        times.push(t);
        states.push(state);
        Ok(())
    };

    record(0, &rho, &mut diag)?;
    for k in 0..steps {
        let t = cfg.t_start + k as f64 * cfg.dt;
        rho = eq.rk4_step(t, cfg.dt, &rho);
        let done = k + 1;
        if done % cfg.record_stride == 0 || done == steps {
            record(done, &rho, &mut diag)?;
        }
    }
    if diag.max_trace_dev > 1e-8 {
        log::warn!("trace deviation {:.3e} exceeds 1e-8", diag.max_trace_dev);
    }
    Ok(Evolution { times, states, diagnostics: diag })
}
