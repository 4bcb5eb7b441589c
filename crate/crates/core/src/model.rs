//! Physical model: parameters, the Lorentzian reservoir, time-dependent
//! decay rates, Hamiltonians and dissipators.
//!
//! Units: the reservoir width λ is fixed to 1, so every time is `λt` and
//! every frequency or rate is in units of λ. The reservoir centre is stored
//! through the detuning `s` (`ω₀ = ω_L + sλ`).
//!
//! The master equation is written in the frame rotating with the drive on
//! the charger. Dissipative dynamics requires resonance (`ω_A = ω_L`), which
//! fixes the charger eigenbasis `|±_A⟩` to the `σˣ` eigenstates.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::qmath::{
    kron, on_battery, on_charger, qubit, sigma_minus, sigma_plus, sigma_x, sigma_z, CMat, Mat2, Mat4, C64,
};

/// Below this magnitude a rate is treated as non-negative when segmenting.
pub const RATE_ZERO_TOL: f64 = 1e-15;

/// Secular approximation is considered safe from this value of `p` on.
pub const SECULAR_P_MIN: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_l: f64,
    /// Drive amplitude Ω.
    pub drive: f64,
    /// Charger–battery coupling.
    pub g: f64,
    /// Effective reservoir coupling η².
    pub eta_sq: f64,
    /// Reservoir detuning `(ω₀ − ω_L)/λ`.
    pub s: f64,
}

impl Default for SystemParams {
    /// `ω_A = ω_B = ω_L = 100`, `Ω = 0.1 ω_A`, `g = 4`, `η² = 1`, `s = 6`.
    fn default() -> Self {
        SystemParams { omega_a: 100.0, omega_b: 100.0, omega_l: 100.0, drive: 10.0, g: 4.0, eta_sq: 1.0, s: 6.0 }
    }
}

impl SystemParams {
    pub const LAMBDA: f64 = 1.0;

    /// `Δ = |ω_A − ω_L|`.
    pub fn detuning(&self) -> f64 {
        (self.omega_a - self.omega_l).abs()
    }

    /// `p = √(Δ² + Ω²)/λ`.
    pub fn p(&self) -> f64 {
        self.detuning().hypot(self.drive) / Self::LAMBDA
    }

    pub fn omega0(&self) -> f64 {
        self.omega_l + self.s * Self::LAMBDA
    }

    /// Reservoir correlation time `1/λ`.
    pub fn tau_c(&self) -> f64 {
        1.0 / Self::LAMBDA
    }

    /// Charger time scale `(Δ² + Ω²)^{-1/2}`.
    pub fn tau_a(&self) -> f64 {
        1.0 / self.detuning().hypot(self.drive)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("omega_l", self.omega_l),
            ("Omega", self.drive),
            ("g", self.g),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.eta_sq.is_finite() && self.eta_sq > 0.0) {
            return Err(Error::invalid("eta2", format!("must be > 0, got {}", self.eta_sq)));
        }
        if !self.s.is_finite() {
            return Err(Error::invalid("s", "must be finite"));
        }
        Ok(())
    }

    /// Returns whether `p ≥ 10`; logs a warning otherwise.
    pub fn check_secular(&self) -> bool {
        let ok = self.p() >= SECULAR_P_MIN;
        if !ok {
            log::warn!("p = {} < {SECULAR_P_MIN}: secular approximation is questionable", self.p());
        }
        ok
    }

    pub fn check_resonant(&self) -> Result<()> {
        let detuning = self.detuning();
        if detuning > 1e-12 * self.omega_a.max(1.0) {
            return Err(Error::NotResonant { detuning });
        }
        Ok(())
    }

    /// Asymptotic dephasing rate `γ₀(∞) = η²/(4(1+s²))`.
    pub fn gamma0_asymptotic(&self) -> f64 {
        self.eta_sq / (4.0 * (1.0 + self.s * self.s))
    }
}

/// Lorentzian spectral density `J(ω)`.
pub fn lorentzian_density(params: &SystemParams, omega: f64) -> f64 {
    let lambda = SystemParams::LAMBDA;
    let d = omega - params.omega0();
    params.eta_sq / (2.0 * PI) * lambda * lambda / (d * d + lambda * lambda)
}

/// Dissipator channel in the charger eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    /// Incoherent loss, `ξ = +1`.
    Plus,
    /// Incoherent gain, `ξ = −1`.
    Minus,
    /// Dephasing, `ξ = 0`.
    Zero,
}

impl Channel {
    fn xi(self) -> f64 {
        match self {
            Channel::Plus => 1.0,
            Channel::Minus => -1.0,
            Channel::Zero => 0.0,
        }
    }

    /// Channel weight at resonance: `C₊ = C₀ = ½`, `C₋ = −½`.
    fn resonant_weight(self) -> f64 {
        match self {
            Channel::Plus | Channel::Zero => 0.5,
            Channel::Minus => -0.5,
        }
    }
}

/// `γ_ξ(t)` for the Lorentzian reservoir, using the resonant channel weights.
pub fn gamma_xi(params: &SystemParams, t: f64, channel: Channel) -> f64 {
    let q = params.s - channel.xi() * params.p();
    let lt = SystemParams::LAMBDA * t;
    let decay = (-lt).exp();
    params.eta_sq * channel.resonant_weight() / (2.0 * (1.0 + q * q))
        * (1.0 - decay * (q * lt).cos() + decay * q * (q * lt).sin())
}

/// `lim_{t→∞} γ_ξ(t)`.
pub fn gamma_xi_asymptotic(params: &SystemParams, channel: Channel) -> f64 {
    let q = params.s - channel.xi() * params.p();
    params.eta_sq * channel.resonant_weight() / (2.0 * (1.0 + q * q))
}

/// Time-dependent dephasing rate `γ₀(t)`.
pub fn gamma0_of_t(params: &SystemParams, t: f64) -> f64 {
    let s = params.s;
    let lt = SystemParams::LAMBDA * t;
    params.eta_sq * (1.0 - (-lt).exp() * ((s * lt).cos() - s * (s * lt).sin())) / (4.0 * (1.0 + s * s))
}

/// Window average `(1/T) ∫_{t−T/2}^{t+T/2} f(u) du` by composite Simpson.
pub fn coarse_grain(f: impl Fn(f64) -> f64, t: f64, window: f64) -> Result<f64> {
    if window.is_nan() || window < 0.0 {
        return Err(Error::invalid("T", format!("window must be >= 0, got {window}")));
    }
    let lo = t - window / 2.0;
    let hi = t + window / 2.0;
    if lo < -1e-15 {
        return Err(Error::WindowBelowZero { lo, hi });
    }
    if window == 0.0 {
        return Ok(f(t));
    }
    let lo = lo.max(0.0);
    // at least 101 points, and a node spacing no coarser than 1e-2
    let mut intervals = ((window / 1e-2).ceil() as usize).max(100);
    if intervals % 2 == 1 {
        intervals += 1;
    }
    let h = (hi - lo) / intervals as f64;
    let mut sum = f(lo) + f(hi);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + k as f64 * h);
    }
    Ok(sum * h / 3.0 / window)
}

pub fn coarse_grained_gamma0(params: &SystemParams, t: f64, window: f64) -> Result<f64> {
    coarse_grain(|u| gamma0_of_t(params, u), t, window)
}

/// Jump operator `σˣ_A ⊗ 𝟙`.
pub fn sigma_x_charger() -> Mat4 {
    on_charger(&sigma_x())
}

/// Static part `Ĥ₀ = −(Ω/2) σˣ_A + (ω_B/2) σᶻ_B`.
pub fn hamiltonian_h0(params: &SystemParams) -> Mat4 {
    on_charger(&sigma_x()).scale_real(-params.drive / 2.0) + on_battery(&sigma_z()).scale_real(params.omega_b / 2.0)
}

/// Exchange term `Ĥ₁(t) = g(e^{iω_L t} σ⁺_A σ⁻_B + h.c.)`.
pub fn hamiltonian_h1(params: &SystemParams, t: f64) -> Mat4 {
    let phase = C64::from_polar(1.0, params.omega_l * t);
    let forward = kron(&sigma_plus(), &sigma_minus());
    (forward.scale(phase) + forward.adjoint().scale(phase.conj())).scale_real(params.g)
}

/// Hamiltonian in the frame that also rotates the battery at `ω_L`; time
/// independent. Ergotropy, concurrence and energy agree with the default
/// frame because the two differ by a battery z-rotation.
pub fn hamiltonian_corotating(params: &SystemParams) -> Mat4 {
    let forward = kron(&sigma_plus(), &sigma_minus());
    on_charger(&sigma_x()).scale_real(-params.drive / 2.0)
        + on_battery(&sigma_z()).scale_real((params.omega_b - params.omega_l) / 2.0)
        + (forward + forward.adjoint()).scale_real(params.g)
}

/// Reduced dephasing dissipator `γ₀ (σˣ_A ρ σˣ_A − ρ)`.
pub fn dissipator_dephasing(rho: &Mat4, gamma0: f64) -> Mat4 {
    let x = sigma_x_charger();
    (x * *rho * x - *rho).scale_real(gamma0)
}

/// Secular-rate triple `(γ₊, γ₋, γ₀)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SecularRates {
    pub plus: f64,
    pub minus: f64,
    pub zero: f64,
}

impl SecularRates {
    pub fn at(params: &SystemParams, t: f64) -> Self {
        SecularRates {
            plus: gamma_xi(params, t, Channel::Plus),
            minus: gamma_xi(params, t, Channel::Minus),
            zero: gamma0_of_t(params, t),
        }
    }

    pub fn asymptotic(params: &SystemParams) -> Self {
        SecularRates {
            plus: gamma_xi_asymptotic(params, Channel::Plus),
            minus: gamma_xi_asymptotic(params, Channel::Minus),
            zero: params.gamma0_asymptotic(),
        }
    }
}

/// Charger ladder operators in the resonant eigenbasis `|+⟩ = |↑ˣ⟩`,
/// `|−⟩ = |↓ˣ⟩`: returns `(σ̄⁺, σ̄⁻)` embedded on the charger.
fn barred_ladder() -> (Mat4, Mat4) {
    let plus = qubit::UP_X;
    let minus = qubit::DOWN_X;
    let raise: Mat2 = CMat(std::array::from_fn(|i| std::array::from_fn(|j| plus[i] * minus[j].conj())));
    let raise = on_charger(&raise);
    (raise, raise.adjoint())
}

/// Full secular dissipator with loss, gain and dephasing channels acting on
/// the charger. Requires resonance.
pub fn dissipator_secular_full(rho: &Mat4, rates: SecularRates) -> Mat4 {
    let (up, down) = barred_ladder();
    let lindblad = |l: &Mat4, rate: f64| -> Mat4 {
        if rate == 0.0 {
            return Mat4::zeros();
        }
        let ldl = l.adjoint() * *l;
        (*l * *rho * l.adjoint() - (ldl * *rho + *rho * ldl).scale_real(0.5)).scale_real(rate)
    };
    lindblad(&down, rates.plus) + lindblad(&up, rates.minus) + dissipator_dephasing(rho, rates.zero)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateSign {
    /// `γ₀ ≥ 0`, including `|γ₀| < 1e-15`.
    NonNegative,
    Negative,
}

impl RateSign {
    pub fn of(gamma0: f64) -> Self {
        if gamma0 < -RATE_ZERO_TOL {
            RateSign::Negative
        } else {
            RateSign::NonNegative
        }
    }
}

/// Contiguous run of grid indices `start..end` sharing the sign of `γ₀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignSegment {
    pub start: usize,
    pub end: usize,
    pub sign: RateSign,
}

/// Rates precomputed on a uniform grid `t_k = k·dt`.
#[derive(Clone, Debug)]
pub struct RateSchedule {
    pub dt: f64,
    pub t_grid: Vec<f64>,
    pub gamma0: Vec<f64>,
    pub gamma_plus: Option<Vec<f64>>,
    pub gamma_minus: Option<Vec<f64>>,
    pub segments: Vec<SignSegment>,
}

impl RateSchedule {
    /// Builds a schedule from arbitrary per-point rates; used for the
    /// constant-rate stubs in tests and studies.
    pub fn from_rates(dt: f64, gamma0: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
        }
        let t_grid = (0..gamma0.len()).map(|k| k as f64 * dt).collect();
        let segments = segment_signs(&gamma0);
        Ok(RateSchedule { dt, t_grid, gamma0, gamma_plus: None, gamma_minus: None, segments })
    }

    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn sign_at(&self, k: usize) -> RateSign {
        RateSign::of(self.gamma0[k])
    }

    pub fn negative_segments(&self) -> impl Iterator<Item = &SignSegment> {
        self.segments.iter().filter(|s| s.sign == RateSign::Negative)
    }

    /// Grid index where the first negative segment ends (first index with
    /// `γ₀ ≥ 0` after it).
    pub fn end_of_first_negative(&self) -> Option<usize> {
        self.negative_segments().next().map(|s| s.end)
    }
}

fn segment_signs(gamma0: &[f64]) -> Vec<SignSegment> {
    let mut segments: Vec<SignSegment> = Vec::new();
    for (k, &g) in gamma0.iter().enumerate() {
        let sign = RateSign::of(g);
        match segments.last_mut() {
            Some(seg) if seg.sign == sign => seg.end = k + 1,
            _ => segments.push(SignSegment { start: k, end: k + 1, sign }),
        }
    }
    segments
}

/// Precomputes `γ₀` (and optionally `γ±`) on `t_k = k·dt`, `k = 0..=round(t_max/dt)`.
pub fn build_rate_schedule(params: &SystemParams, t_max: f64, dt: f64, with_secular: bool) -> Result<RateSchedule> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::invalid("t_max", format!("must be > 0, got {t_max}")));
    }
    let n = (t_max / dt).round() as usize;
    let gamma0 = (0..=n).map(|k| gamma0_of_t(params, k as f64 * dt)).collect();
    let mut sched = RateSchedule::from_rates(dt, gamma0)?;
    if with_secular {
        let rate = |c| sched.t_grid.iter().map(|&t| gamma_xi(params, t, c)).collect::<Vec<_>>();
        sched.gamma_plus = Some(rate(Channel::Plus));
        sched.gamma_minus = Some(rate(Channel::Minus));
    }
    Ok(sched)
}

/// Zero crossings of `γ₀` in `[t_lo, t_hi]`, located by scanning on a grid
/// of `step` and refining by bisection.
pub fn gamma0_roots(params: &SystemParams, t_lo: f64, t_hi: f64, step: f64) -> Vec<f64> {
    let f = |t| gamma0_of_t(params, t);
    let mut roots = Vec::new();
    let mut a = t_lo;
    let mut fa = f(a);
    while a < t_hi {
        let b = (a + step).min(t_hi);
        let fb = f(b);
        if fa != 0.0 && fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    roots
}
