//! Command-line harness around `clab-core`.
//!
//! Every run resolves a JSON config plus command-line overrides, writes a
//! `manifest.json` echoing the resolved config, then the experiment's CSV
//! tables and `summary.json`. Exit codes: 0 success, 1 a check failed,
//! 2 configuration error.

pub mod config;
mod error;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Experiment, ExperimentConfig, Manifest};
pub use error::{CliError, Result};
pub use experiments::Outcome;

#[derive(Debug, Parser)]
#[command(
    name = "clab",
    version,
    about = "Seeded contrastive-loss and few-shot experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// DCL-NSCL gap against its bound as the class count grows.
    GapSweep(RunArgs),
    /// Train free embeddings and check the collapse geometry.
    UfmRun(RunArgs),
    /// Few-shot errors against the variance bounds.
    BoundCheck(RunArgs),
    /// Monte-Carlo batch-loss gap against its interval.
    BatchCheck(RunArgs),
    /// Losses, dispersion and geometry of a saved bundle.
    Report(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config, or a manifest from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Parameter overrides as `--key value`, keys in kebab-case.
    #[arg(
        trailing_var_arg = true,
        allow_hyphen_values = true,
        value_name = "OVERRIDES"
    )]
    pub overrides: Vec<String>,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::GapSweep(a) => (Experiment::GapSweep, a),
            Command::UfmRun(a) => (Experiment::UfmRun, a),
            Command::BoundCheck(a) => (Experiment::BoundCheck, a),
            Command::BatchCheck(a) => (Experiment::BatchCheck, a),
            Command::Report(a) => (Experiment::Report, a),
        }
    }
}

/// Resolves the configuration and runs the experiment.
pub fn run(cli: Cli) -> Result<Outcome> {
    let (experiment, args) = cli.command.split();
    let file = args
        .config
        .as_deref()
        .map(config::load_config_file)
        .transpose()?;
    let cfg = config::resolve(experiment, file, args.seed, args.out, &args.overrides)?;
    experiments::run(cfg)
}
