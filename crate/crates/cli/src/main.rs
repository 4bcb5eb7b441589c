//! `qbatt`: runs single simulations or named scenarios and writes CSV files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qbatt_core::config::{parse_config, RunConfig};
use qbatt_core::integrator::DissipatorKind;
use qbatt_core::scenario::{run_command, run_scenario, Command};
use qbatt_core::Error;

#[derive(Parser, Debug)]
#[command(name = "qbatt", version, about = "Charger-mediated quantum battery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Decay rates and their coarse-grained average.
    Rates,
    /// RK4 master-equation evolution.
    Evolve,
    /// Non-Markovian quantum-jump unraveling.
    Nmqj,
    /// Stochastic circuit ensemble.
    Circuit,
    /// A named study (fig2_rates, fig2_concurrence, fig3_ergotropy,
    /// fig4_weights, fig5_earlystage, fig5_longtime).
    Scenario { name: String },
}

#[derive(Args, Debug)]
struct Opts {
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    eta2: Option<f64>,
    #[arg(long, global = true)]
    g: Option<f64>,
    /// Trajectory truncation level (0, 1 or 2).
    #[arg(long, global = true)]
    nmax: Option<usize>,
    #[arg(long, global = true)]
    shots: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Include the incoherent loss and gain channels.
    #[arg(long, global = true)]
    full_secular: bool,
    /// Divide reconstructed trajectory states by their trace.
    #[arg(long, global = true)]
    renormalize: bool,
    /// Worker threads for independent curves.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

impl Opts {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            dt: self.dt,
            eta_sq: self.eta2,
            g: self.g,
            n_max: self.nmax,
            shots: self.shots,
            seed: self.seed,
            dissipator: self.full_secular.then_some(DissipatorKind::FullSecular),
            renormalize: self.renormalize.then_some(true),
            jobs: self.jobs,
            out: self.out.clone(),
            ..Default::default()
        }
    }
}

fn run(cli: &Cli) -> qbatt_core::Result<Vec<PathBuf>> {
    let Some(path) = &cli.opts.config else {
        return Err(Error::InvalidParameter { name: "config", reason: "--config <path> is required".into() });
    };
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    cfg.merge(&cli.opts.overrides());
    cfg.validate()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    match &cli.command {
        Cmd::Rates => run_command(Command::Rates, &cfg, &out),
        Cmd::Evolve => run_command(Command::Evolve, &cfg, &out),
        Cmd::Nmqj => run_command(Command::Nmqj, &cfg, &out),
        Cmd::Circuit => run_command(Command::Circuit, &cfg, &out),
        Cmd::Scenario { name } => run_scenario(name, &cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
