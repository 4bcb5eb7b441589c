use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |m - m^dag| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix has a significantly negative eigenvalue {0:.3e}")]
    NegativeEigenvalue(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("resonance required for the dissipative model: detuning {detuning} != 0")]
    NotResonant { detuning: f64 },

    #[error("coarse-graining window [{lo}, {hi}] extends below t = 0")]
    WindowBelowZero { lo: f64, hi: f64 },

    #[error("n_max = {0} is not supported (levels 0, 1 and 2 only)")]
    UnsupportedTruncation(usize),

    #[error("step {step} (lambda t = {t}): jump probability gamma0*dt = {probability} is outside [0, 1)")]
    StepTooCoarse { step: usize, t: f64, probability: f64 },

    #[error("step {step}: expected a {expected} rate, got gamma0 = {gamma0}")]
    WrongRateSign { step: usize, expected: &'static str, gamma0: f64 },

    #[error("switch time lambda t = {t_switch} lies inside a negative-rate segment (gamma0 = {gamma0:.3e})")]
    SwitchInsideNegativeSegment { t_switch: f64, gamma0: f64 },

    #[error("trace drift {drift:.3e} at lambda t = {t} exceeds 1e-6")]
    TraceDrift { t: f64, drift: f64 },

    #[error("positivity violated at lambda t = {t}: minimum eigenvalue {min_eig:.3e}")]
    PositivityViolation { t: f64, min_eig: f64 },

    #[error("{name} = {value} at lambda t = {t} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64, t: f64 },

    #[error("cumulative weight clamp {total:.3e} exceeds 1e-6")]
    WeightClamp { total: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("unknown scenario `{name}`; valid names: {}", valid.join(", "))]
    UnknownScenario { name: String, valid: Vec<&'static str> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when a numerical monitor tripped during a run; every other error
    /// comes from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TraceDrift { .. }
                | Error::PositivityViolation { .. }
                | Error::WeightClamp { .. }
                | Error::OutOfRange { .. }
                | Error::NegativeEigenvalue(_)
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
