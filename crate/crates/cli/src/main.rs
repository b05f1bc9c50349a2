//! `emfield`: verification driver.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
//! 3 I/O error.

mod commands;
mod config;
mod error;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "emfield", version, about = "Verify the random-field construction on light-cone grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run verification suites and emit a JSON report.
    Verify(Common),
    /// Vacuum expectations of configured operator words and field products.
    Expect(Common),
    /// Covariance matrix of the χ field over real test functions (CSV).
    Covariance(Common),
    /// Gaussian samples of the χ field (CSV).
    Sample(Common),
    /// Rotation and boost invariance of the pairing.
    Lorentz(Common),
    /// Radial refinement study of the pairing.
    Convergence(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON run configuration; an empty configuration is used when neither this nor EMFIELD_CONFIG is set.
    #[arg(long, env = "EMFIELD_CONFIG")]
    pub config: Option<PathBuf>,
    /// Suite to run (repeatable); overrides the configuration.
    #[arg(long)]
    pub suite: Vec<String>,
    /// RNG seed; overrides the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Omit wall-clock timings so reruns are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write CSV output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    match &common.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let (name, common) = match &cli.command {
        Command::Verify(c) => ("verify", c),
        Command::Expect(c) => ("expect", c),
        Command::Covariance(c) => ("covariance", c),
        Command::Sample(c) => ("sample", c),
        Command::Lorentz(c) => ("lorentz", c),
        Command::Convergence(c) => ("convergence", c),
    };
    let config = load(common)?;
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let ctx = commands::Invocation::new(name, &config, common);
    match cli.command {
        Command::Verify(_) => commands::verify(&ctx),
        Command::Expect(_) => commands::expect(&ctx),
        Command::Covariance(_) => commands::covariance(&ctx),
        Command::Sample(_) => commands::sample(&ctx),
        Command::Lorentz(_) => commands::single_suite(&ctx, "lorentz"),
        Command::Convergence(_) => commands::single_suite(&ctx, "convergence"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("emfield: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
