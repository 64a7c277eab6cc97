//! Soft parameter transfer: copy the source model, optimize on target data
//! under a freeze policy, and compare against a from-scratch baseline with
//! the same budget and seed.

use serde::{Deserialize, Serialize};

use super::FineTuneReport;
use crate::embednet::{
    mean_squared_error, split_indices, train_loop, EmbedNetConfig, FeatureEmbeddingModel,
    TrainOptions,
};
use crate::numcore::OptimizerConfig;
use crate::synthdata::{Dataset, MaskedSample};
use crate::{Error, Result};

/// Which parameter blocks stay fixed during fine-tuning.
///
/// `Trunk` freezes the embedding table and the shared encoder, leaving the
/// head trainable. `HeadOnlyTrainable` spells out the same intent and
/// freezes the identical set; configs may use either name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezePolicy {
    #[default]
    None,
    Trunk,
    HeadOnlyTrainable,
}

/// Budget and policy for [`fine_tune`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FineTuneConfig {
    pub freeze: FreezePolicy,
    pub optimizer: OptimizerConfig,
    /// Number of optimizer steps (mini-batches), not epochs.
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Used for the internal split when no explicit eval set is supplied.
    pub train_fraction: f64,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self {
            freeze: FreezePolicy::None,
            optimizer: OptimizerConfig::default(),
            steps: 200,
            batch_size: 16,
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig("train_fraction must lie in (0, 1)".into()));
        }
        self.optimizer.validate()
    }
}

fn frozen_ranges(model: &FeatureEmbeddingModel, policy: FreezePolicy) -> Vec<std::ops::Range<usize>> {
    let layout = model.param_layout();
    match policy {
        FreezePolicy::None => Vec::new(),
        FreezePolicy::Trunk | FreezePolicy::HeadOnlyTrainable => {
            vec![layout.embedding, layout.encoder]
        }
    }
}

fn budgeted_options(
    config: &FineTuneConfig,
    n_train: usize,
    frozen: Vec<std::ops::Range<usize>>,
    weight_decay: f64,
) -> TrainOptions {
    let steps_per_epoch = n_train.div_ceil(config.batch_size);
    TrainOptions {
        optimizer: config.optimizer,
        epochs: config.steps.div_ceil(steps_per_epoch.max(1)),
        step_budget: Some(config.steps),
        batch_size: config.batch_size,
        seed: config.seed,
        frozen,
        embedding_weight_decay: weight_decay,
        // Budgeted runs keep a constant rate.
        final_lr_fraction: 1.0,
    }
}

/// Copies `source_model`, optimizes it on `target_data` for `config.steps`
/// steps under the freeze policy, and reports its validation loss next to a
/// from-scratch model trained with the identical budget and seed.
///
/// With `eval_data` given, all of `target_data` is trained on and the losses
/// are measured on `eval_data`; otherwise `target_data` is shuffle-split by
/// `config.train_fraction`. `steps == 0` returns the source parameters
/// bit for bit.
pub fn fine_tune(
    source_model: &FeatureEmbeddingModel,
    target_data: &Dataset,
    eval_data: Option<&Dataset>,
    config: &FineTuneConfig,
) -> Result<(FeatureEmbeddingModel, FineTuneReport)> {
    config.validate()?;
    if target_data.is_empty() {
        return Err(Error::Contract("fine_tune needs non-empty target data".into()));
    }
    if target_data.feature_count != source_model.feature_count() {
        return Err(Error::Contract(format!(
            "architecture mismatch: target has {} features, source model {}",
            target_data.feature_count,
            source_model.feature_count()
        )));
    }
    if let Some(eval) = eval_data {
        if eval.feature_count != source_model.feature_count() {
            return Err(Error::Contract("architecture mismatch on eval data".into()));
        }
        if eval.is_empty() {
            return Err(Error::Contract("explicit eval set must be non-empty".into()));
        }
    }

    let (train_samples, val_samples): (Vec<MaskedSample>, Vec<MaskedSample>) = match eval_data {
        Some(eval) => (target_data.samples.clone(), eval.samples.clone()),
        None => {
            let (ti, vi) = split_indices(target_data.len(), config.train_fraction, config.seed)?;
            (
                ti.iter().map(|&i| target_data.samples[i].clone()).collect(),
                vi.iter().map(|&i| target_data.samples[i].clone()).collect(),
            )
        }
    };

    let wd = source_model.config().embedding_weight_decay;

    // Transferred model: source parameters, freeze policy applied.
    let mut transferred = source_model.clone();
    if config.steps > 0 {
        let opts = budgeted_options(
            config,
            train_samples.len(),
            frozen_ranges(&transferred, config.freeze),
            wd,
        );
        train_loop(&mut transferred, &train_samples, None, &val_samples, &opts)?;
    }
    let transferred_val_loss = mean_squared_error(&transferred, &val_samples)?;

    // Baseline: fresh initialization, same architecture, same budget/seed,
    // nothing frozen.
    let arch = EmbedNetConfig {
        seed: config.seed,
        ..source_model.config().clone()
    };
    let mut baseline = FeatureEmbeddingModel::new(source_model.feature_count(), arch)?;
    if config.steps > 0 {
        let opts = budgeted_options(config, train_samples.len(), Vec::new(), wd);
        train_loop(&mut baseline, &train_samples, None, &val_samples, &opts)?;
    }
    let baseline_val_loss = mean_squared_error(&baseline, &val_samples)?;

    Ok((
        transferred,
        FineTuneReport {
            baseline_val_loss,
            transferred_val_loss,
            negative_transfer: transferred_val_loss > baseline_val_loss,
        },
    ))
}
