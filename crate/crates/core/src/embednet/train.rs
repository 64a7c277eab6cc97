//! Mini-batch training for the feature-embedding model.
//!
//! One loop serves plain, per-sample-weighted, frozen-block, and
//! step-budgeted training; the public entry points differ only in how they
//! fill [`TrainOptions`]. All randomness comes from dedicated ChaCha streams
//! of the training seed, so traces are reproducible bit for bit.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{FeatureEmbeddingModel, ModelGrads};
use super::EmbedNetConfig;
use crate::numcore::OptimizerConfig;
use crate::synthdata::{Dataset, MaskedSample};
use crate::{Error, Result};

const SPLIT_STREAM: u64 = 0xF1;
const SHUFFLE_STREAM: u64 = 0xF2;

/// Losses recorded at the end of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Per-epoch training and validation losses.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochStats>,
}

impl TrainingTrace {
    pub fn final_val_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_loss)
    }
}

/// Knobs for the shared training loop.
#[derive(Debug, Clone)]
pub(crate) struct TrainOptions {
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    /// Stop after this many optimizer steps, even mid-epoch.
    pub step_budget: Option<usize>,
    pub batch_size: usize,
    pub seed: u64,
    /// Flat-parameter ranges whose gradients are zeroed before each step.
    pub frozen: Vec<Range<usize>>,
    /// L2 coefficient applied to the embedding block of the loss gradient.
    pub embedding_weight_decay: f64,
    /// Linear learning-rate anneal target, as a fraction of the base rate.
    pub final_lr_fraction: f64,
}

impl TrainOptions {
    pub fn from_config(config: &EmbedNetConfig) -> Self {
        Self {
            optimizer: config.optimizer,
            epochs: config.epochs,
            step_budget: None,
            batch_size: config.batch_size,
            seed: config.seed,
            frozen: Vec::new(),
            embedding_weight_decay: config.embedding_weight_decay,
            final_lr_fraction: config.final_lr_fraction,
        }
    }
}

/// Deterministic shuffled split of `0..n` into train/validation index sets.
/// Both sides are guaranteed non-empty.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    if n < 2 {
        return Err(Error::Contract(format!(
            "need at least 2 samples to split, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let n_train = ((train_fraction * n as f64).floor() as usize).clamp(1, n - 1);
    let val = indices.split_off(n_train);
    Ok((indices, val))
}

/// Mean squared error of the model over `samples`.
pub fn mean_squared_error(
    model: &FeatureEmbeddingModel,
    samples: &[MaskedSample],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract("mse over empty sample set".into()));
    }
    let mut sum = 0.0;
    for s in samples {
        let err = model.predict(s)? - s.target();
        sum += err * err;
    }
    Ok(sum / samples.len() as f64)
}

/// Trains on a seeded shuffle-split of `data` using the training fields of
/// `config` (the architecture fields are the model's own). Returns the
/// per-epoch trace.
pub fn train(
    model: &mut FeatureEmbeddingModel,
    data: &Dataset,
    config: &EmbedNetConfig,
) -> Result<TrainingTrace> {
    train_weighted_impl(model, data, None, config)
}

/// Like [`train`], with a non-negative weight per sample scaling its loss
/// contribution. Uniform weights of 1 reproduce [`train`] exactly.
pub fn train_weighted(
    model: &mut FeatureEmbeddingModel,
    data: &Dataset,
    weights: &[f64],
    config: &EmbedNetConfig,
) -> Result<TrainingTrace> {
    if weights.len() != data.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} samples",
            weights.len(),
            data.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::Contract(format!("weights must be finite and >= 0, got {w}")));
    }
    train_weighted_impl(model, data, Some(weights), config)
}

fn train_weighted_impl(
    model: &mut FeatureEmbeddingModel,
    data: &Dataset,
    weights: Option<&[f64]>,
    config: &EmbedNetConfig,
) -> Result<TrainingTrace> {
    config.validate()?;
    if data.feature_count != model.feature_count() {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} features, model expects {}",
            data.feature_count,
            model.feature_count()
        )));
    }
    let (train_idx, val_idx) = split_indices(data.len(), config.train_fraction, config.seed)?;
    let train_samples: Vec<MaskedSample> =
        train_idx.iter().map(|&i| data.samples[i].clone()).collect();
    let val_samples: Vec<MaskedSample> =
        val_idx.iter().map(|&i| data.samples[i].clone()).collect();
    let train_weights: Option<Vec<f64>> =
        weights.map(|ws| train_idx.iter().map(|&i| ws[i]).collect());
    train_loop(
        model,
        &train_samples,
        train_weights.as_deref(),
        &val_samples,
        &TrainOptions::from_config(config),
    )
}

/// MSE of the model over `samples` together with its analytic gradient in
/// flat-parameter order. This is the quantity the training loop descends,
/// exposed for gradient checking.
pub fn batch_gradient(
    model: &FeatureEmbeddingModel,
    samples: &[MaskedSample],
) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::Contract("batch_gradient over empty sample set".into()));
    }
    let mut grads = ModelGrads::zeros_like(model);
    let mut flat = Vec::with_capacity(model.param_count());
    let batch: Vec<usize> = (0..samples.len()).collect();
    let loss = batch_loss_and_flat_grads(model, samples, &batch, None, &mut grads, &mut flat)?;
    Ok((loss, flat))
}

/// Computes one mini-batch's weighted MSE and its flat parameter gradient.
/// `grads` is zeroed and reused; `flat_grads` is cleared and refilled in the
/// model's flat-parameter order.
pub(crate) fn batch_loss_and_flat_grads(
    model: &FeatureEmbeddingModel,
    samples: &[MaskedSample],
    batch: &[usize],
    weights: Option<&[f64]>,
    grads: &mut ModelGrads,
    flat_grads: &mut Vec<f64>,
) -> Result<f64> {
    let bsz = batch.len() as f64;
    grads.zero();
    let mut batch_loss = 0.0;
    for &idx in batch {
        let sample = &samples[idx];
        let w = weights.map_or(1.0, |ws| ws[idx]);
        let fwd = model.forward_sample(sample)?;
        let err = fwd.prediction - sample.target();
        batch_loss += w * err * err;
        let d_pred = 2.0 * w * err / bsz;
        model.backward_sample(&fwd, d_pred, grads)?;
    }
    flat_grads.clear();
    grads.flatten_into(flat_grads);
    Ok(batch_loss / bsz)
}

/// The shared loop. `train`/`val` are already split; `weights` aligns with
/// `train`.
pub(crate) fn train_loop(
    model: &mut FeatureEmbeddingModel,
    train: &[MaskedSample],
    weights: Option<&[f64]>,
    val: &[MaskedSample],
    opts: &TrainOptions,
) -> Result<TrainingTrace> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Contract(
            "training needs non-empty train and validation sets".into(),
        ));
    }
    if let Some(ws) = weights {
        if ws.len() != train.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} training samples",
                ws.len(),
                train.len()
            )));
        }
    }
    opts.optimizer.validate()?;
    if opts.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }

    let mut params = model.flat_params();
    let mut opt = opts.optimizer.init(params.len())?;
    let mut grads = ModelGrads::zeros_like(model);
    let mut flat_grads: Vec<f64> = Vec::with_capacity(params.len());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    shuffle_rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut trace = TrainingTrace::default();
    let mut steps_done = 0usize;
    let budget = opts.step_budget.unwrap_or(usize::MAX);

    let base_lr = opts.optimizer.lr();
    'outer: for epoch in 0..opts.epochs {
        if steps_done >= budget {
            break;
        }
        if opts.final_lr_fraction < 1.0 && opts.epochs > 1 {
            let progress = epoch as f64 / (opts.epochs - 1) as f64;
            opt.set_lr(base_lr * (1.0 - progress * (1.0 - opts.final_lr_fraction)));
        }
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(opts.batch_size) {
            let batch_loss =
                batch_loss_and_flat_grads(model, train, batch, weights, &mut grads, &mut flat_grads)?;
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}, batch {batches}"
                )));
            }
            loss_sum += batch_loss;
            batches += 1;

            if opts.embedding_weight_decay > 0.0 {
                let emb = model.param_layout().embedding;
                for i in emb {
                    flat_grads[i] += opts.embedding_weight_decay * params[i];
                }
            }
            for range in &opts.frozen {
                flat_grads[range.clone()].iter_mut().for_each(|g| *g = 0.0);
            }
            opt.step(&mut params, &flat_grads)?;
            model.set_flat_params(&params)?;

            steps_done += 1;
            if steps_done >= budget {
                trace.epochs.push(EpochStats {
                    epoch,
                    train_loss: loss_sum / batches as f64,
                    val_loss: mean_squared_error(model, val)?,
                });
                break 'outer;
            }
        }
        trace.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / batches as f64,
            val_loss: mean_squared_error(model, val)?,
        });
    }
    Ok(trace)
}
