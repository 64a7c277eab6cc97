//! Run configuration: a single JSON file with defaults for everything,
//! overridden by command-line flags (flags > file > defaults). Unknown keys
//! are rejected with the offending key named.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use maskedtl_core::anomaly::MonConfig;
use maskedtl_core::embednet::EmbedNetConfig;
use maskedtl_core::synthdata::{Eq1Interpretation, TaskSpec};
use maskedtl_core::{Error, Result};

/// Benchmark-generation block.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_samples: usize,
    pub p_miss: f64,
    pub task: TaskSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            p_miss: 0.2,
            task: TaskSpec::reference(),
        }
    }
}

/// Detection-pipeline block: normality model, calibration, injection, and
/// how the normal dataset is split into fit/calibrate/evaluate parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub mon: MonConfig,
    pub quantile: f64,
    pub append_missing_fraction: bool,
    pub injection_fraction: f64,
    pub shift_sd_multiples: f64,
    pub fit_fraction: f64,
    pub calibrate_fraction: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            mon: MonConfig::default(),
            quantile: 0.99,
            append_missing_fraction: false,
            injection_fraction: 0.05,
            shift_sd_multiples: 3.0,
            fit_fraction: 0.4,
            calibrate_fraction: 0.3,
        }
    }
}

/// Output/input file names; relative names resolve against `--out`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    pub trace: PathBuf,
    pub embeddings: PathBuf,
    pub embedding_metrics: PathBuf,
    pub transfer_report: PathBuf,
    pub detection_report: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            data: "bench.csv".into(),
            checkpoint: "model.json".into(),
            trace: "trace.csv".into(),
            embeddings: "embeddings.csv".into(),
            embedding_metrics: "embedding_metrics.json".into(),
            transfer_report: "transfer_report.json".into(),
            detection_report: "detection_report.json".into(),
        }
    }
}

/// Everything a command run needs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub eq1_interpretation: Eq1Interpretation,
    pub data: DataConfig,
    pub model: EmbedNetConfig,
    pub detect: DetectConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    /// Loads the config file if given, otherwise starts from defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
                    Error::InvalidConfig(format!("{}: {e}", p.display()))
                })?;
                Ok(cfg)
            }
        }
    }

    /// Applies the global `--seed` override: it drives both data generation
    /// and model initialization/training.
    pub fn override_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.seed = s;
            self.model.seed = s;
        }
    }

    /// Resolves a configured file name against the output directory.
    pub fn resolve(&self, out_dir: &Path, name: &Path) -> PathBuf {
        if name.is_absolute() {
            name.to_path_buf()
        } else {
            out_dir.join(name)
        }
    }
}
