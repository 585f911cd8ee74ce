//! Command-line front end: panel files in, estimates and experiment tables
//! out.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{Context, Outcome};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "mqf", version, about = "Matrix quantile factor models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Panel file (long CSV or JSON manifest); repeat for a second input.
    #[arg(long, global = true)]
    pub input: Vec<PathBuf>,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "mqf-out")]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "MQF_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Estimate loadings and factors for given (k1, k2).
    Fit,
    /// Select the factor numbers.
    Select,
    /// Draw a simulated panel and its truth.
    Simulate,
    /// Run a Monte Carlo experiment.
    Experiment,
    /// Fill missing entries with the fitted common component.
    Impute,
    /// Similarity of two loading spaces.
    Similarity,
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let ctx = Context {
        inputs: cli.input.clone(),
        config,
        out: cli.out.clone(),
    };
    let go = || match cli.command {
        Command::Fit => commands::cmd_fit(&ctx),
        Command::Select => commands::cmd_select(&ctx),
        Command::Simulate => commands::cmd_simulate(&ctx),
        Command::Experiment => commands::cmd_experiment(&ctx),
        Command::Impute => commands::cmd_impute(&ctx),
        Command::Similarity => commands::cmd_similarity(&ctx),
    };
    match cli.threads {
        None => go(),
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(go),
    }
}
