//! Batch CLI tying the pipeline together: benchmark generation, training,
//! embedding export, transfer experiments, anomaly detection, and gradient
//! checking. Every command is deterministic given its config and seed, and
//! all file outputs are written atomically.
//!
//! Exit codes: 0 success, 1 user/config error, 2 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::RunConfig;
use maskedtl_core::Error;

#[derive(Parser)]
#[command(
    name = "maskedtl",
    version,
    about = "Masked-feature embedding models, transfer learning, and anomaly detection"
)]
struct Cli {
    /// JSON config file; flags override file values, file values override
    /// defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for data generation and model training.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for outputs (and default location of inputs).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark dataset (CSV + JSON sidecar).
    Generate {
        /// Number of samples.
        #[arg(long)]
        n: Option<usize>,
        /// Per-feature missingness probability.
        #[arg(long = "p-miss")]
        p_miss: Option<f64>,
    },
    /// Train the feature-embedding model on a dataset CSV.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        /// Dataset CSV to train on (defaults to paths.data).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Export embeddings and cluster metrics from a checkpoint.
    Embeddings {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Run a zero-/few-shot transfer experiment from a JSON spec.
    Transfer {
        /// Experiment spec JSON.
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run the anomaly-detection pipeline on a dataset of normals.
    Detect {
        /// Calibration quantile for the decision threshold.
        #[arg(long)]
        quantile: Option<f64>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck {
        /// Relative-error tolerance.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        /// Micro-batch size.
        #[arg(long, default_value_t = 5)]
        batch_size: usize,
        /// Test hook: corrupt one gradient coordinate to force a failure.
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
}

fn run(cli: Cli) -> maskedtl_core::Result<i32> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    config.override_seed(cli.seed);
    let out_dir = cli.out;
    if !out_dir.exists() {
        std::fs::create_dir_all(&out_dir)?;
    }

    match cli.command {
        Command::Generate { n, p_miss } => {
            if let Some(n) = n {
                config.data.n_samples = n;
            }
            if let Some(p) = p_miss {
                config.data.p_miss = p;
            }
            commands::generate::run(&config, &out_dir)?;
            Ok(0)
        }
        Command::Train { epochs, data } => {
            if let Some(e) = epochs {
                config.model.epochs = e;
            }
            if let Some(d) = data {
                config.paths.data = d;
            }
            commands::train::run(&config, &out_dir)?;
            Ok(0)
        }
        Command::Embeddings { checkpoint } => {
            if let Some(c) = checkpoint {
                config.paths.checkpoint = c;
            }
            commands::embeddings::run(&config, &out_dir)?;
            Ok(0)
        }
        Command::Transfer { spec } => {
            commands::transfer::run(&config, &out_dir, &spec)?;
            Ok(0)
        }
        Command::Detect { quantile, checkpoint } => {
            if let Some(q) = quantile {
                config.detect.quantile = q;
            }
            if let Some(c) = checkpoint {
                config.paths.checkpoint = c;
            }
            commands::detect::run(&config, &out_dir)?;
            Ok(0)
        }
        Command::Gradcheck {
            tolerance,
            batch_size,
            corrupt_gradient,
        } => commands::gradcheck::run(&config, &out_dir, tolerance, batch_size, corrupt_gradient),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Numerical(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
