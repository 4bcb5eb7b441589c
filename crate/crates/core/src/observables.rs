//! Battery energy, ergotropy, concurrence and the time series they are
//! recorded into.
//!
//! All battery quantities are computed from the reduced state `ρ_B` and
//! reported as fractions of `ω_B`. With index 0 = `|↑ᶻ⟩`, the charged battery
//! has `r_z = +1`, so energy is `(Tr ρ_B + r_z)/2` and ergotropy
//! `(r + r_z)/2`. Both forms stay linear for unnormalized inputs, which is
//! what a truncated trajectory reconstruction produces.

use crate::error::{Error, Result};
use crate::qmath::{hermitian_eigen, kron, psd_part, psd_sqrt, sigma_y, DensityMatrix4, Mat2, Mat4};

/// Bloch components `r_i = Tr[σ_i ρ]` of a single-qubit operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn of(rho: &Mat2) -> Self {
        let off = rho.0[0][1];
        BlochVector { x: 2.0 * off.re, y: -2.0 * off.im, z: (rho.0[0][0] - rho.0[1][1]).re }
    }

    pub fn length(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// `E_B / ω_B`.
pub fn energy_fraction(rho: &DensityMatrix4) -> f64 {
    let rb = rho.battery();
    0.5 * (rb.trace().re + BlochVector::of(&rb).z)
}

/// Battery energy `E_B = (ω_B/2) Tr[(σᶻ_B + 𝟙) ρ]`.
pub fn energy(rho: &DensityMatrix4, omega_b: f64) -> f64 {
    omega_b * energy_fraction(rho)
}

/// `𝓔_B / ω_B = (r + r_z)/2`.
pub fn ergotropy_fraction(rho: &DensityMatrix4) -> f64 {
    let r = BlochVector::of(&rho.battery());
    (0.5 * (r.length() + r.z)).max(0.0)
}

/// Battery ergotropy from the Bloch-vector closed form.
pub fn ergotropy(rho: &DensityMatrix4, omega_b: f64) -> f64 {
    omega_b * ergotropy_fraction(rho)
}

/// Ergotropy from its definition: energy of `ρ_B` minus the energy of the
/// passive state that puts the larger population in `|↓ᶻ⟩`.
pub fn ergotropy_oracle(rho_b: &Mat2, omega_b: f64) -> Result<f64> {
    let eig = hermitian_eigen(rho_b)?;
    // level energies: |↑⟩ → ω_B, |↓⟩ → 0
    let energy = omega_b * rho_b.0[0][0].re;
    let passive = omega_b * eig.values[1];
    Ok(energy - passive)
}

/// `Tr ρ²`.
pub fn purity(rho: &DensityMatrix4) -> f64 {
    let m = rho.matrix();
    (*m * *m).trace().re
}

/// Wootters concurrence via Hermitian square roots.
///
/// The square roots of the eigenvalues of `ρ ρ̃` are the eigenvalues of
/// `√(√ρ ρ̃ √ρ)`, with `ρ̃ = (σʸ⊗σʸ) ρ* (σʸ⊗σʸ)`. Negative eigenvalues left
/// by time-local integration are dropped from `ρ` first.
pub fn concurrence(rho: &DensityMatrix4) -> Result<f64> {
    let pos = psd_part(rho.matrix())?;
    let sqrt_rho = psd_sqrt(&pos)?;
    let r = sqrt_rho * spin_flip(&pos) * sqrt_rho;
    let roots = hermitian_eigen(&psd_sqrt(&r.hermitian_part())?)?.values;
    let c = roots[0] - roots[1] - roots[2] - roots[3];
    Ok(c.clamp(0.0, 1.0))
}

/// `ρ̃ = (σʸ⊗σʸ) ρ* (σʸ⊗σʸ)`.
pub fn spin_flip(rho: &Mat4) -> Mat4 {
    let yy = kron(&sigma_y(), &sigma_y());
    yy * rho.conj() * yy
}

/// One record of a simulated time series. Ratios are relative to `ω_B`.
/// Trajectory weights are present for unraveling runs only, standard errors
/// for ensemble runs only.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObservableRow {
    pub lambda_t: f64,
    pub gamma0: f64,
    pub energy_over_omega_b: f64,
    pub ergotropy_over_omega_b: f64,
    pub concurrence: f64,
    pub k0: Option<f64>,
    pub k1_sum: Option<f64>,
    pub k2_sum: Option<f64>,
    pub k_total: Option<f64>,
    pub trace_dev: f64,
    pub min_eig: f64,
    pub energy_se: Option<f64>,
    pub ergotropy_se: Option<f64>,
    pub concurrence_se: Option<f64>,
}

impl ObservableRow {
    pub fn from_state(lambda_t: f64, gamma0: f64, rho: &DensityMatrix4) -> Result<Self> {
        Ok(ObservableRow {
            lambda_t,
            gamma0,
            energy_over_omega_b: energy_fraction(rho),
            ergotropy_over_omega_b: ergotropy_fraction(rho),
            concurrence: concurrence(rho)?,
            trace_dev: rho.trace_deviation(),
            min_eig: rho.min_eigenvalue(),
            ..Default::default()
        })
    }

    pub const CSV_HEADER: [&'static str; 14] = [
        "lambda_t",
        "gamma0",
        "energy_over_omegaB",
        "ergotropy_over_omegaB",
        "concurrence",
        "K0",
        "K1_sum",
        "K2_sum",
        "K_total",
        "trace_dev",
        "min_eig",
        "energy_se",
        "ergotropy_se",
        "concurrence_se",
    ];

    pub fn csv_fields(&self) -> [Option<f64>; 14] {
        [
            Some(self.lambda_t),
            Some(self.gamma0),
            Some(self.energy_over_omega_b),
            Some(self.ergotropy_over_omega_b),
            Some(self.concurrence),
            self.k0,
            self.k1_sum,
            self.k2_sum,
            self.k_total,
            Some(self.trace_dev),
            Some(self.min_eig),
            self.energy_se,
            self.ergotropy_se,
            self.concurrence_se,
        ]
    }
}

/// Time-ordered observable records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservableSeries {
    rows: Vec<ObservableRow>,
}

const BOUND_TOL: f64 = 1e-9;

impl ObservableSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: impl IntoIterator<Item = ObservableRow>) -> Result<Self> {
        let mut s = Self::new();
        for row in rows {
            s.push(row)?;
        }
        Ok(s)
    }

    /// Appends a row; times must be strictly increasing.
    pub fn push(&mut self, row: ObservableRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.lambda_t.is_nan() || row.lambda_t <= last.lambda_t {
                return Err(Error::invalid(
                    "lambda_t",
                    format!("rows must be strictly increasing ({} after {})", row.lambda_t, last.lambda_t),
                ));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[ObservableRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&ObservableRow> {
        self.rows.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lambda_t).collect()
    }

    pub fn column(&self, f: impl Fn(&ObservableRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    /// Row whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&ObservableRow> {
        self.rows.iter().min_by(|a, b| (a.lambda_t - t).abs().total_cmp(&(b.lambda_t - t).abs()))
    }

    /// Checks the `[0, 1]` ranges of concurrence, energy and ergotropy.
    pub fn check_bounds(&self) -> Result<()> {
        for r in &self.rows {
            for (name, v) in [
                ("concurrence", r.concurrence),
                ("energy_over_omegaB", r.energy_over_omega_b),
                ("ergotropy_over_omegaB", r.ergotropy_over_omega_b),
            ] {
                if !(-BOUND_TOL..=1.0 + BOUND_TOL).contains(&v) {
                    return Err(Error::OutOfRange { name, value: v, t: r.lambda_t });
                }
            }
        }
        Ok(())
    }
}
