//! Command-line pipeline around the `skullnet` library and its on-disk formats.

pub mod binio;
pub mod commands;
pub mod error;
pub mod features;
pub mod knn_file;
pub mod model_file;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use skullnet::MlknnConfig;

pub use error::{CliError, CliResult, EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};

/// Environment variable capping worker threads; 0 or unset means one per core.
pub const THREADS_ENV: &str = "SKULLNET_THREADS";

#[derive(Debug, Parser)]
#[command(name = "skullnet", version, about = "Skull CT fracture triage pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic dataset.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the network; also writes `<out>.history.csv` and `<out>.split.csv`.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write flattened convolutional features for a directory of images.
    Extract {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Split file written by `train`; restricts the images to `--partition`.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Comma-separated partitions, e.g. `train,val`.
        #[arg(long)]
        partition: Option<String>,
    },
    /// Fit ML-KNN on extracted features.
    FitKnn {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// L2-normalize features before computing distances.
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print `<label> <0|1> <confidence>` for one image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        knn: PathBuf,
        #[arg(long)]
        image: PathBuf,
    },
    /// Write report.txt, roc.csv, pr.csv and confusion.csv.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        knn: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Defaults to `<data>/labels.csv`.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        report_dir: PathBuf,
        #[arg(long)]
        split: Option<PathBuf>,
        /// Defaults to `test` when `--split` is given.
        #[arg(long)]
        partition: Option<String>,
    },
}

/// Reads the thread cap from the environment.
pub fn thread_count() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
    }
}

/// Runs one command; anything meant for stdout is returned.
pub fn run(cli: Cli) -> CliResult<String> {
    use commands::*;
    match cli.command {
        Command::Synth { n, seed, out } => cmd_synth(n, seed, &out).map(|_| String::new()),
        Command::Train { data, config, out } => {
            cmd_train(&data, config.as_deref(), &out).map(|_| String::new())
        }
        Command::Extract {
            model,
            data,
            out,
            split,
            partition,
        } => cmd_extract(&model, &data, &out, split.as_deref(), partition.as_deref())
            .map(|_| String::new()),
        Command::FitKnn {
            features,
            labels,
            k,
            s,
            normalize,
            out,
        } => {
            let config = MlknnConfig {
                k,
                smoothing: s,
                normalize,
            };
            cmd_fit_knn(&features, &labels, config, &out).map(|_| String::new())
        }
        Command::Predict { model, knn, image } => cmd_predict(&model, &knn, &image),
        Command::Evaluate {
            model,
            knn,
            data,
            labels,
            report_dir,
            split,
            partition,
        } => cmd_evaluate(&commands::EvaluateArgs {
            model: &model,
            knn: &knn,
            data: &data,
            labels: labels.as_deref(),
            report_dir: &report_dir,
            split: split.as_deref(),
            partition: partition.as_deref(),
        }),
    }
}
