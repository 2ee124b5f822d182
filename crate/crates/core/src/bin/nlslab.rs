//! Command-line driver: one subcommand per experiment preset.
//!
//! Exit codes: 0 all invariants held, 1 an invariant failed,
//! 2 usage or configuration error.

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nlslab::config::{parse_config, RunConfig};
use nlslab::error::Error;
use nlslab::experiments::run_experiment;

#[derive(Parser)]
#[command(name = "nlslab", version, about = "Numerical laboratory for the mass-critical focusing NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the radial ground state and report its invariants
    Groundstate(Common),
    /// Linearized operator spectrum and coercivity estimate
    Spectrum(Common),
    /// Symmetry-group decomposition round trips on perturbed fields
    Decompose(Common),
    /// Split-step soliton evolution with conservation tracking
    Evolve(Common),
    /// Pseudoconformal blowup run with modulation tracking
    PcBlowup(Common),
    /// Randomized Gagliardo-Nirenberg inequality sweep
    GnSweep(Common),
    /// Discrete operator identity residuals
    IdentitySuite(Common),
}

/// Flags shared by every subcommand; each overrides the config file value.
#[derive(Args)]
struct Common {
    /// TOML config file; flags below override its values
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    dimension: Option<usize>,
    /// Cartesian grid points per axis (power of two)
    #[arg(long)]
    grid_n: Option<usize>,
    /// Box side length
    #[arg(long)]
    grid_box: Option<f64>,
    #[arg(long)]
    tol_ode: Option<f64>,
    #[arg(long)]
    tol_orth: Option<f64>,
    #[arg(long)]
    tol_id: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write summary.json and CSV artifacts
    #[arg(long)]
    output_dir: Option<String>,
}

impl Common {
    fn into_config(self, experiment: &str) -> Result<RunConfig, Error> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                parse_config(&text)?
            }
            None => RunConfig::default(),
        };
        config.experiment = experiment.into();
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        apply!(dimension, grid_n, grid_box, tol_ode, tol_orth, tol_id, dt, t_end, record_every, seed);
        if self.output_dir.is_some() {
            config.output_dir = self.output_dir;
        }
        config.validate()?;
        Ok(config)
    }
}

fn usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::ParseError(_) | Error::ValidationError { .. } | Error::InvalidArgument(_) | Error::Io(_)
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = match cli.command {
        Command::Groundstate(c) => ("groundstate", c),
        Command::Spectrum(c) => ("spectrum", c),
        Command::Decompose(c) => ("decompose", c),
        Command::Evolve(c) => ("evolve", c),
        Command::PcBlowup(c) => ("pc-blowup", c),
        Command::GnSweep(c) => ("gn-sweep", c),
        Command::IdentitySuite(c) => ("identity-suite", c),
    };
    let config = match common.into_config(name) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nlslab: {e}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&config) {
        Ok(report) => {
            for (key, value) in &report.summary {
                println!("{key} = {value}");
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                eprintln!("nlslab: failed invariants: {}", report.failures.join(", "));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("nlslab: {e}");
            if usage_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
