//! Flat `key = value` run configuration.
//!
//! Every field is optional so that a scenario can supply its own defaults
//! and only explicitly written keys override them. Lines starting with `#`
//! and trailing `# ...` comments are ignored.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::circuit::CircuitConfig;
use crate::error::{Error, Result};
use crate::integrator::{DissipatorKind, EvolutionConfig, Mode};
use crate::model::SystemParams;
use crate::nmqj::{NmqjConfig, TopLevelGain, MAX_LEVEL};
use crate::qmath::{qubit, Ket4};

/// Named initial two-qubit states.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialState {
    /// `|↑ʸ_A ↓ᶻ_B⟩`.
    #[default]
    UpYDown,
    /// `|↑ᶻ_A ↓ᶻ_B⟩`.
    UpDown,
    /// `(|↑↓⟩ + |↓↑⟩)/√2`.
    Bell,
}

impl InitialState {
    pub fn ket(self) -> Ket4 {
        match self {
            InitialState::UpYDown => Ket4::product(qubit::UP_Y, qubit::DOWN),
            InitialState::UpDown => Ket4::product(qubit::UP, qubit::DOWN),
            InitialState::Bell => Ket4::bell_psi_plus(),
        }
    }
}

impl FromStr for InitialState {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "up_y_down" => Ok(InitialState::UpYDown),
            "up_down" => Ok(InitialState::UpDown),
            "bell" => Ok(InitialState::Bell),
            _ => Err(format!("expected up_y_down, up_down or bell, got `{s}`")),
        }
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitialState::UpYDown => "up_y_down",
            InitialState::UpDown => "up_down",
            InitialState::Bell => "bell",
        })
    }
}

pub fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    match s {
        "non_markovian" => Ok(Mode::NonMarkovian),
        "markovian_asymptotic" => Ok(Mode::MarkovianAsymptotic),
        "unitary" => Ok(Mode::Unitary),
        _ => Err(format!("expected non_markovian, markovian_asymptotic or unitary, got `{s}`")),
    }
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::NonMarkovian => "non_markovian",
        Mode::MarkovianAsymptotic => "markovian_asymptotic",
        Mode::Unitary => "unitary",
    }
}

fn parse_dissipator(s: &str) -> std::result::Result<DissipatorKind, String> {
    match s {
        "dephasing_only" => Ok(DissipatorKind::DephasingOnly),
        "full_secular" => Ok(DissipatorKind::FullSecular),
        _ => Err(format!("expected dephasing_only or full_secular, got `{s}`")),
    }
}

pub fn dissipator_name(d: DissipatorKind) -> &'static str {
    match d {
        DissipatorKind::DephasingOnly => "dephasing_only",
        DissipatorKind::FullSecular => "full_secular",
    }
}

fn parse_top_level(s: &str) -> std::result::Result<TopLevelGain, String> {
    match s {
        "conserving" => Ok(TopLevelGain::Conserving),
        "literal" => Ok(TopLevelGain::Literal),
        _ => Err(format!("expected conserving or literal, got `{s}`")),
    }
}

pub fn top_level_name(t: TopLevelGain) -> &'static str {
    match t {
        TopLevelGain::Conserving => "conserving",
        TopLevelGain::Literal => "literal",
    }
}

/// Recognized keys, in the order they are documented.
pub const KEYS: [&str; 22] = [
    "omega_a",
    "omega_b",
    "omega_l",
    "Omega",
    "p",
    "g",
    "eta2",
    "s",
    "dt",
    "t_max",
    "mode",
    "dissipator",
    "record_stride",
    "n_max",
    "renormalize",
    "top_level",
    "shots",
    "seed",
    "initial",
    "scenario",
    "out",
    "jobs",
];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub omega_a: Option<f64>,
    pub omega_b: Option<f64>,
    pub omega_l: Option<f64>,
    pub drive: Option<f64>,
    pub p: Option<f64>,
    pub g: Option<f64>,
    pub eta_sq: Option<f64>,
    pub s: Option<f64>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub mode: Option<Mode>,
    pub dissipator: Option<DissipatorKind>,
    pub record_stride: Option<usize>,
    pub n_max: Option<usize>,
    pub renormalize: Option<bool>,
    pub top_level: Option<TopLevelGain>,
    pub shots: Option<usize>,
    pub seed: Option<u64>,
    pub initial: Option<InitialState>,
    pub scenario: Option<String>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| Error::Parse { line, message: format!("`{key}`: cannot parse `{raw}`: {e}") })
}

fn named<T>(line: usize, raw: &str, f: fn(&str) -> std::result::Result<T, String>) -> Result<T> {
    f(raw).map_err(|message| Error::Parse { line, message })
}

/// Parses and validates a configuration file's text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, raw)) = content.split_once('=') else {
            return Err(Error::Parse { line, message: format!("expected `key = value`, got `{content}`") });
        };
        let key = key.trim();
        let raw = raw.trim().trim_matches('"');
        if raw.is_empty() {
            return Err(Error::Parse { line, message: format!("`{key}` has no value") });
        }
        match key {
            "omega_a" => cfg.omega_a = Some(value(line, key, raw)?),
            "omega_b" => cfg.omega_b = Some(value(line, key, raw)?),
            "omega_l" => cfg.omega_l = Some(value(line, key, raw)?),
            "Omega" => cfg.drive = Some(value(line, key, raw)?),
            "p" => cfg.p = Some(value(line, key, raw)?),
            "g" => cfg.g = Some(value(line, key, raw)?),
            "eta2" => cfg.eta_sq = Some(value(line, key, raw)?),
            "s" => cfg.s = Some(value(line, key, raw)?),
            "dt" => cfg.dt = Some(value(line, key, raw)?),
            "t_max" => cfg.t_max = Some(value(line, key, raw)?),
            "mode" => cfg.mode = Some(named(line, raw, parse_mode)?),
            "dissipator" => cfg.dissipator = Some(named(line, raw, parse_dissipator)?),
            "record_stride" => cfg.record_stride = Some(value(line, key, raw)?),
            "n_max" => cfg.n_max = Some(value(line, key, raw)?),
            "renormalize" => cfg.renormalize = Some(value(line, key, raw)?),
            "top_level" => cfg.top_level = Some(named(line, raw, parse_top_level)?),
            "shots" => cfg.shots = Some(value(line, key, raw)?),
            "seed" => cfg.seed = Some(value(line, key, raw)?),
            "initial" => cfg.initial = Some(value(line, key, raw)?),
            "scenario" => cfg.scenario = Some(raw.to_string()),
            "out" => cfg.out = Some(PathBuf::from(raw)),
            "jobs" => cfg.jobs = Some(value(line, key, raw)?),
            _ => return Err(Error::UnknownKey { line, key: key.to_string() }),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

macro_rules! take {
    ($dst:ident, $src:ident, $($field:ident),*) => {
        $(if $src.$field.is_some() { $dst.$field = $src.$field.clone(); })*
    };
}

impl RunConfig {
    /// Fields set in `other` replace the ones in `self`.
    pub fn merge(&mut self, other: &RunConfig) {
        take!(self, other, omega_a, omega_b, omega_l, g, eta_sq, s, dt, t_max, mode, dissipator, record_stride);
        take!(self, other, n_max, renormalize, top_level, shots, seed, initial, scenario, out, jobs);
        if other.drive.is_some() {
            self.drive = other.drive;
            self.p = None;
        }
        if other.p.is_some() {
            self.p = other.p;
            self.drive = None;
        }
    }

    /// Applies the physical overrides to `base`. `p` fixes the drive through
    /// `Ω = √(p² − Δ²)`.
    pub fn params(&self, base: SystemParams) -> Result<SystemParams> {
        let mut params = SystemParams {
            omega_a: self.omega_a.unwrap_or(base.omega_a),
            omega_b: self.omega_b.unwrap_or(base.omega_b),
            omega_l: self.omega_l.unwrap_or(base.omega_l),
            drive: self.drive.unwrap_or(base.drive),
            g: self.g.unwrap_or(base.g),
            eta_sq: self.eta_sq.unwrap_or(base.eta_sq),
            s: self.s.unwrap_or(base.s),
        };
        if let Some(p) = self.p {
            if self.drive.is_some() {
                return Err(Error::invalid("p", "`p` and `Omega` cannot both be given"));
            }
            let detuning = params.detuning();
            if !(p.is_finite() && p >= detuning) {
                return Err(Error::invalid("p", format!("must be >= detuning {detuning}, got {p}")));
            }
            params.drive = (p * p - detuning * detuning).sqrt();
        }
        params.validate()?;
        Ok(params)
    }

    pub fn evolution(&self, base: EvolutionConfig) -> EvolutionConfig {
        EvolutionConfig {
            dt: self.dt.unwrap_or(base.dt),
            t_max: self.t_max.unwrap_or(base.t_max),
            mode: self.mode.unwrap_or(base.mode),
            dissipator: self.dissipator.unwrap_or(base.dissipator),
            record_stride: self.record_stride.unwrap_or(base.record_stride),
            ..base
        }
    }

    pub fn nmqj(&self, base: NmqjConfig) -> NmqjConfig {
        NmqjConfig {
            dt: self.dt.unwrap_or(base.dt),
            t_max: self.t_max.unwrap_or(base.t_max),
            n_max: self.n_max.unwrap_or(base.n_max),
            record_stride: self.record_stride.unwrap_or(base.record_stride),
            renormalize: self.renormalize.unwrap_or(base.renormalize),
            top_level: self.top_level.unwrap_or(base.top_level),
        }
    }

    pub fn circuit(&self, base: CircuitConfig) -> CircuitConfig {
        CircuitConfig {
            dt: self.dt.unwrap_or(base.dt),
            t_max: self.t_max.unwrap_or(base.t_max),
            shots: self.shots.unwrap_or(base.shots),
            seed: self.seed.unwrap_or(base.seed),
            record_stride: self.record_stride.unwrap_or(base.record_stride),
            ..base
        }
    }

    pub fn initial_state(&self, base: InitialState) -> InitialState {
        self.initial.unwrap_or(base)
    }

    /// Checks every value that is set, with the default parameter set filling
    /// the gaps.
    pub fn validate(&self) -> Result<()> {
        self.params(SystemParams::default())?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
            }
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid("t_max", format!("must be > 0, got {t}")));
            }
        }
        if self.record_stride == Some(0) {
            return Err(Error::invalid("record_stride", "must be >= 1"));
        }
        if let Some(n) = self.n_max {
            if n > MAX_LEVEL {
                return Err(Error::UnsupportedTruncation(n));
            }
        }
        if self.shots == Some(0) {
            return Err(Error::invalid("shots", "must be >= 1"));
        }
        if self.jobs == Some(0) {
            return Err(Error::invalid("jobs", "must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.params(SystemParams::default()).unwrap(), SystemParams::default());
        assert_eq!(cfg.evolution(EvolutionConfig::default()), EvolutionConfig::default());
        assert_eq!(parse_config("# nothing\n\n   \n").unwrap(), RunConfig::default());
    }

    #[test]
    fn coupling_override() {
        let cfg = parse_config("g = 0.2\n").unwrap();
        let params = cfg.params(SystemParams::default()).unwrap();
        assert_eq!(params, SystemParams { g: 0.2, ..SystemParams::default() });
    }

    #[test]
    fn values_and_comments() {
        let text = "# header\nOmega = 100 # drive\neta2=3\nmode = unitary\nrenormalize = true\nn_max = 1\nseed = 42\ninitial = \"bell\"\nout = results\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.drive, Some(100.0));
        assert_eq!(cfg.eta_sq, Some(3.0));
        assert_eq!(cfg.mode, Some(Mode::Unitary));
        assert_eq!(cfg.renormalize, Some(true));
        assert_eq!(cfg.n_max, Some(1));
        assert_eq!(cfg.seed, Some(42));
        assert_eq!(cfg.initial, Some(InitialState::Bell));
        assert_eq!(cfg.out, Some(PathBuf::from("results")));
    }

    #[test]
    fn p_sets_the_drive() {
        let params = parse_config("p = 100").unwrap().params(SystemParams::default()).unwrap();
        assert_eq!(params.drive, 100.0);
        assert!((params.p() - 100.0).abs() < 1e-12);
        let detuned = parse_config("omega_l = 94\np = 10").unwrap().params(SystemParams::default()).unwrap();
        assert!((detuned.drive - 8.0).abs() < 1e-12);
        assert!(parse_config("p = 10\nOmega = 5").is_err());
        assert!(parse_config("omega_l = 80\np = 10").is_err());
    }

    #[test]
    fn rejections() {
        assert!(matches!(parse_config("dt = -1"), Err(Error::InvalidParameter { name: "dt", .. })));
        assert!(matches!(parse_config("eta2 = 0"), Err(Error::InvalidParameter { name: "eta2", .. })));
        assert!(matches!(parse_config("n_max = 3"), Err(Error::UnsupportedTruncation(3))));
        assert!(matches!(parse_config("shots = 0"), Err(Error::InvalidParameter { .. })));
        match parse_config("g = 1\n\nfoo = 2\n") {
            Err(Error::UnknownKey { line, key }) => assert_eq!((line, key.as_str()), (3, "foo")),
            other => panic!("{other:?}"),
        }
        match parse_config("g = 1\ndt 0.1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("g = fast"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("mode = sideways"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("g ="), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn merge_prefers_the_override() {
        let mut cfg = parse_config("g = 1\np = 100\ndt = 1e-3").unwrap();
        let flags = RunConfig { g: Some(0.2), drive: Some(10.0), ..Default::default() };
        cfg.merge(&flags);
        assert_eq!(cfg.g, Some(0.2));
        assert_eq!(cfg.dt, Some(1e-3));
        assert_eq!(cfg.p, None);
        assert_eq!(cfg.params(SystemParams::default()).unwrap().drive, 10.0);
    }

    #[test]
    fn every_key_is_recognized() {
        for key in KEYS {
            let err = parse_config(&format!("{key} = ?"));
            assert!(!matches!(err, Err(Error::UnknownKey { .. })), "{key}");
        }
    }
}
