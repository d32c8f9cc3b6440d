//! Config-driven experiment runner.
//!
//! `dcsmd run --preset fig1` runs a named experiment, `dcsmd run --config
//! file.toml` an explicit one; both write CSV, SVG and a manifest. `dcsmd
//! verify` runs the property suites and prints a pass/fail table.

pub mod config;
pub mod presets;
pub mod runner;
pub mod svg;
pub mod verify;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;
pub use presets::{preset, PRESETS};
pub use runner::{execute, simulate, Report, VariantResult};

use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dcsmd", version, about = "Distributed composite stochastic mirror descent experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a preset or a config file.
    Run(RunArgs),
    /// List the available presets.
    ListPresets,
    /// Run the property suites and print a pass/fail table.
    Verify {
        #[arg(long, default_value_t = config::DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Debug, clap::Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["preset", "config"])))]
pub struct RunArgs {
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// The configuration after command-line overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match (&self.preset, &self.config) {
            (Some(name), None) => preset(name)?,
            (None, Some(path)) => ExperimentConfig::load(path)?,
            _ => return Err(Error::Usage("give exactly one of --preset or --config".into())),
        };
        if let Some(t) = self.trials {
            c.trials = t;
        }
        if let Some(h) = self.horizon {
            c = c.with_horizon(h);
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if self.out.is_some() {
            c.out = self.out.clone();
        }
        Ok(c)
    }
}

fn run_command(args: &RunArgs, out: &mut dyn Write) -> Result<()> {
    let config = args.resolve()?;
    let report = execute(&config)?;
    let io = |e| Error::io("stdout", e);
    writeln!(out, "{} -> {}", config.name, report.out_dir.display()).map_err(io)?;
    for v in &report.variants {
        let rate = v
            .summary
            .rate
            .map_or_else(|| "n/a".to_string(), |r| format!("{:.3} (R² {:.4})", r.slope, r.r_squared));
        writeln!(
            out,
            "  {:<12} initial {:.4e}  final {:.4e}  ratio {:.3}  slope {rate}",
            v.label,
            v.summary.initial_median(),
            v.summary.final_median(),
            v.final_ratio()
        )
        .map_err(io)?;
    }
    if let Some(slowest) = report.laplace_slowest() {
        writeln!(out, "  laplace slowest: {slowest}").map_err(io)?;
    }
    Ok(())
}

/// Executes a parsed command, writing human-readable output to `out`.
/// Returns the process exit status.
pub fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Run(args) => run_command(args, out),
        Command::ListPresets => PRESETS.iter().try_for_each(|name| {
            writeln!(out, "{name:<18} {}", presets::describe(name).unwrap_or_default()).map_err(|e| Error::io("stdout", e))
        }),
        Command::Verify { seed } => {
            let checks = verify::all(*seed);
            let _ = write!(out, "{}", verify::table(&checks));
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Error::InvariantViolation("verification failed".into()))
            }
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_usage() {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(&cli, out, err),
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = write!(out, "{e}");
            EXIT_OK
        }
    }
}
