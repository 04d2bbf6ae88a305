//! Command-line front end. Every command reads an experiment manifest,
//! applies `--set key=value` overrides, and writes CSV or plain-text
//! outputs under the manifest's output directory.

mod commands;
mod manifest;

pub use commands::{cmd_evaluate, cmd_grid, cmd_prepare, cmd_report, cmd_synth, cmd_train};
pub use manifest::{
    parse_override, DataFormat, DataSpec, EvalSpec, ExperimentManifest, SynthSpec, OUTPUT_ROOT_ENV,
};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "biser", version, about = "Debiased top-N recommendation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment manifest (key=value lines).
    pub manifest: PathBuf,
    /// Override a manifest key, e.g. `--set train.hidden_dim=200`.
    #[arg(long = "set", value_parser = parse_override)]
    pub overrides: Vec<(String, String)>,
    /// Output directory; defaults to the manifest's `output`, else
    /// `$BISER_OUTPUT_ROOT/<manifest name>`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Global seed (same as `--set seed=...`).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, binarize, filter and split a dataset.
    Prepare(Common),
    /// Train the configured model on a prepared split.
    Train(Common),
    /// Evaluate a checkpoint on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to score; defaults to `<output>/model.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train every grid point and keep the best validation score.
    Grid {
        #[command(flatten)]
        common: Common,
        /// Maximum concurrent training runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Generate a synthetic click dataset with ground truth.
    Synth(Common),
    /// Summarize evaluation outputs across runs.
    Report {
        /// Run directories containing metrics.csv.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Baseline run directories, paired with `--runs` in order.
        #[arg(long, num_args = 1..)]
        baselines: Vec<PathBuf>,
        /// Where to write summary.csv (and ttest.csv).
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Parse { .. } | Error::Io { .. } | Error::Data(_) | Error::Dimension(_) => EXIT_DATA,
        Error::Divergence { .. } | Error::NonFiniteGradient { .. } => EXIT_DIVERGENCE,
        Error::Internal(_) => EXIT_OTHER,
    }
}

fn load(common: &Common) -> crate::Result<ExperimentManifest> {
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.insert(0, ("seed".into(), seed.to_string()));
    }
    ExperimentManifest::load(&common.manifest, common.output.clone(), &overrides)
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Prepare(c) => load(&c).and_then(|m| cmd_prepare(&m).map(drop)),
        Command::Train(c) => load(&c).and_then(|m| cmd_train(&m).map(drop)),
        Command::Evaluate { common, checkpoint } => {
            load(&common).and_then(|m| cmd_evaluate(&m, checkpoint.as_deref()).map(drop))
        }
        Command::Grid { common, jobs } => load(&common).and_then(|m| cmd_grid(&m, jobs).map(drop)),
        Command::Synth(c) => load(&c).and_then(|m| cmd_synth(&m).map(drop)),
        Command::Report { runs, baselines, out } => cmd_report(&runs, &baselines, &out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
