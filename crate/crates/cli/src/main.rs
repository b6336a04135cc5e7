//! `stopout`: command-line driver for the stopout feature pipeline.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Bad invocation: flags, config file, or names that cannot be resolved.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "stopout",
    version,
    about = "Weekly learner features, stopout datasets and stability-selection feature importance"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Top-level seed for every random stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory (required), or output file for `featurize`.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse NDJSON event logs into a store directory.
    Ingest {
        #[arg(long, value_name = "DIR")]
        events: PathBuf,
        #[arg(long, value_name = "FILE")]
        calendar: PathBuf,
    },
    /// Generate a synthetic course from the `synth` config section.
    Synth {
        #[arg(long)]
        learners: Option<usize>,
        #[arg(long)]
        weeks: Option<u32>,
    },
    /// Write a small fixed corpus (fig2, empty, two_learners_tiny).
    Fixture { name: String },
    /// Compute weekly features and cohorts for a store.
    Featurize {
        #[arg(long, value_name = "DIR")]
        store: PathBuf,
    },
    /// Build one lead/lag/cohort prediction dataset.
    Dataset {
        #[arg(long, value_name = "FILE")]
        features: PathBuf,
        #[arg(long, value_name = "FILE")]
        cohorts: PathBuf,
        #[arg(long)]
        lead: u32,
        #[arg(long)]
        lag: u32,
        #[arg(long)]
        cohort: String,
    },
    /// Run randomized logistic regression on a dataset file.
    Rlr {
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        /// Fixed base penalty.
        #[arg(long, conflicts_with = "lambda_scale")]
        lambda: Option<f64>,
        /// Base penalty as a fraction of the null-gradient bound.
        #[arg(long)]
        lambda_scale: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Aggregate one cohort's selection files into feature importance.
    Importance {
        #[arg(long)]
        cohort: String,
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
    },
    /// Featurize, then run every cohort and lead/lag experiment and aggregate.
    Sweep {
        #[arg(long, value_name = "DIR")]
        store: PathBuf,
        #[arg(long)]
        horizon: Option<u32>,
    },
    /// Ranked importance tables and top-5 lists per cohort.
    Report {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Synth { .. } => "synth",
            Command::Fixture { .. } => "fixture",
            Command::Featurize { .. } => "featurize",
            Command::Dataset { .. } => "dataset",
            Command::Rlr { .. } => "rlr",
            Command::Importance { .. } => "importance",
            Command::Sweep { .. } => "sweep",
            Command::Report { .. } => "report",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    ExitCode::from(commands::execute(cli))
}
