//! Transfer-learning toolkit: similarity measures, the when-to-transfer
//! gate, parameter transfer (fine-tuning with freeze policies and
//! hard-shared trunks), instance reweighting, a masked autoencoder for
//! representation transfer, and zero-/few-shot scenario harnesses.

mod autoencoder;
mod finetune;
mod hard_shared;
mod reweight;
mod scenario;
mod similarity;

use serde::{Deserialize, Serialize};

use crate::synthdata::{Dataset, TaskSpec};
use crate::{Error, Result};

pub use autoencoder::{
    autoencoder_encode, autoencoder_fit, autoencoder_reconstruct, masked_reconstruction_mse,
    Autoencoder, AutoencoderConfig,
};
pub use finetune::{fine_tune, FineTuneConfig, FreezePolicy};
pub use hard_shared::{train_hard_shared, HardSharedModel, HardSharedOutcome};
pub use reweight::{instance_reweight, weighted_train, ReweightConfig};
pub use scenario::{
    few_shot, run_experiment, select_source, zero_shot, ExperimentReport, ExperimentSpec,
    FewShotConfig, ScenarioMode, SeedReport, ZeroShotOutcome,
};
pub use similarity::{mmd_similarity, metadata_similarity, when_to_transfer, Bandwidth};

/// A source or target task: metadata vector plus its dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDescriptor {
    pub name: String,
    pub metadata: Vec<f64>,
    pub dataset: Dataset,
}

impl TaskDescriptor {
    pub fn new(name: impl Into<String>, spec: &TaskSpec, dataset: Dataset) -> Result<Self> {
        let d = Self {
            name: name.into(),
            metadata: spec.metadata(),
            dataset,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.metadata.is_empty() || self.metadata.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("task metadata must be non-empty and finite".into()));
        }
        self.dataset.validate()
    }
}

/// Thresholds for the when-to-transfer gate. The label gate is optional:
/// zero-shot targets carry no labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateThresholds {
    /// Minimum feature similarity `exp(-mmd^2)`.
    pub tau_feature: f64,
    /// Minimum metadata cosine similarity.
    pub tau_metadata: f64,
    /// Minimum label similarity `exp(-mmd^2)`, if label data participates.
    pub tau_label: Option<f64>,
}

impl Default for GateThresholds {
    fn default() -> Self {
        Self {
            tau_feature: 0.5,
            tau_metadata: 0.9,
            tau_label: None,
        }
    }
}

/// Similarities and the resulting gate decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub feature_similarity: f64,
    pub label_similarity: Option<f64>,
    pub metadata_similarity: f64,
    pub gate_decision: bool,
}

/// Loss comparison of a transferred model against its from-scratch baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneReport {
    pub baseline_val_loss: f64,
    pub transferred_val_loss: f64,
    /// Exactly `transferred_val_loss > baseline_val_loss`.
    pub negative_transfer: bool,
}

/// Full record of one transfer: who, the gate, and how it went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub source_name: String,
    pub target_name: String,
    #[serde(flatten)]
    pub gate: GateReport,
    #[serde(flatten)]
    pub outcome: FineTuneReport,
}
