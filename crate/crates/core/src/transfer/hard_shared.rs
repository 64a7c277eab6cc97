//! Hard parameter sharing: one embedding table and encoder trained jointly
//! across tasks, with a private head per task.
//!
//! Training interleaves the tasks' mini-batches round-robin inside each
//! epoch. The trunk optimizer steps on every batch; each head's optimizer
//! steps only on its own task's batches, so head trajectories do not bleed
//! into each other. With a single task this reduces to ordinary training.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TaskDescriptor;
use crate::embednet::{
    batch_loss_and_flat_grads, mean_squared_error, split_indices, EmbedNetConfig,
    FeatureEmbeddingModel, ModelGrads,
};
use crate::numcore::{Activation, Mlp};
use crate::synthdata::MaskedSample;
use crate::{Error, Result};

const HEAD_STREAM_BASE: u64 = 0xA0;
const TASK_SHUFFLE_BASE: u64 = 0xB0;

/// Shared trunk plus one prediction head per task.
#[derive(Debug, Clone, PartialEq)]
pub struct HardSharedModel {
    embedding_table: Vec<Vec<f64>>,
    encoder: Mlp,
    heads: Vec<Mlp>,
    config: EmbedNetConfig,
}

impl HardSharedModel {
    pub fn task_count(&self) -> usize {
        self.heads.len()
    }

    pub fn feature_count(&self) -> usize {
        self.embedding_table.len()
    }

    /// The model as seen by task `t`: the shared trunk with that task's
    /// head. Trunk parameters are identical across all views.
    pub fn view(&self, t: usize) -> Result<FeatureEmbeddingModel> {
        let head = self
            .heads
            .get(t)
            .ok_or_else(|| Error::Contract(format!("task index {t} out of range")))?;
        FeatureEmbeddingModel::from_parts(
            self.embedding_table.clone(),
            self.encoder.clone(),
            head.clone(),
            self.config.clone(),
        )
    }
}

/// Result of joint training: the shared model and each task's final
/// validation loss.
#[derive(Debug, Clone)]
pub struct HardSharedOutcome {
    pub model: HardSharedModel,
    pub per_task_val_loss: Vec<f64>,
}

/// Jointly trains a shared trunk with per-task heads on `tasks`.
pub fn train_hard_shared(
    tasks: &[TaskDescriptor],
    config: &EmbedNetConfig,
) -> Result<HardSharedOutcome> {
    config.validate()?;
    if tasks.is_empty() {
        return Err(Error::Contract("hard sharing needs at least one task".into()));
    }
    let k = tasks[0].dataset.feature_count;
    for t in tasks {
        t.validate()?;
        if t.dataset.feature_count != k {
            return Err(Error::Contract(format!(
                "task {} has {} features, expected {k}",
                t.name, t.dataset.feature_count
            )));
        }
    }

    // Trunk and head 0 from the usual seeded init; extra heads from
    // dedicated streams.
    let base = FeatureEmbeddingModel::new(k, config.clone())?;
    let mut heads: Vec<Mlp> = vec![base.head().clone()];
    for t in 1..tasks.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(HEAD_STREAM_BASE + t as u64);
        heads.push(Mlp::init(
            config.code_dim,
            &config.head_hidden,
            1,
            config.activation,
            Activation::Identity,
            &mut rng,
        )?);
    }

    // Scratch models reuse the tested forward/backward machinery; their
    // parameters are re-spliced from the flat trunk/head vectors each step.
    let mut scratch: Vec<FeatureEmbeddingModel> = heads
        .iter()
        .map(|h| {
            FeatureEmbeddingModel::from_parts(
                base.embedding_table().to_vec(),
                base.encoder().clone(),
                h.clone(),
                config.clone(),
            )
        })
        .collect::<Result<_>>()?;

    let layout = base.param_layout();
    let trunk_len = layout.encoder.end;
    let full = base.flat_params();
    let mut trunk_params: Vec<f64> = full[..trunk_len].to_vec();
    let mut head_params: Vec<Vec<f64>> = heads.iter().map(|h| h.flat_params()).collect();

    let mut trunk_opt = config.optimizer.init(trunk_len)?;
    let mut head_opts = heads
        .iter()
        .map(|h| config.optimizer.init(h.param_count()))
        .collect::<Result<Vec<_>>>()?;

    // Per-task train/val sample sets and shuffle streams.
    let mut task_train: Vec<Vec<MaskedSample>> = Vec::with_capacity(tasks.len());
    let mut task_val: Vec<Vec<MaskedSample>> = Vec::with_capacity(tasks.len());
    let mut task_rngs: Vec<ChaCha8Rng> = Vec::with_capacity(tasks.len());
    for (t, task) in tasks.iter().enumerate() {
        let (ti, vi) = split_indices(task.dataset.len(), config.train_fraction, config.seed)?;
        task_train.push(ti.iter().map(|&i| task.dataset.samples[i].clone()).collect());
        task_val.push(vi.iter().map(|&i| task.dataset.samples[i].clone()).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(TASK_SHUFFLE_BASE + t as u64);
        task_rngs.push(rng);
    }
    let mut orders: Vec<Vec<usize>> = task_train.iter().map(|s| (0..s.len()).collect()).collect();

    let mut grads = ModelGrads::zeros_like(&base);
    let mut flat_grads: Vec<f64> = Vec::new();
    let mut assembled: Vec<f64> = vec![0.0; full.len()];
    let base_lr = config.optimizer.lr();

    for epoch in 0..config.epochs {
        if config.final_lr_fraction < 1.0 && config.epochs > 1 {
            let progress = epoch as f64 / (config.epochs - 1) as f64;
            let lr = base_lr * (1.0 - progress * (1.0 - config.final_lr_fraction));
            trunk_opt.set_lr(lr);
            head_opts.iter_mut().for_each(|o| o.set_lr(lr));
        }
        for (order, rng) in orders.iter_mut().zip(task_rngs.iter_mut()) {
            order.shuffle(rng);
        }
        let max_batches = orders
            .iter()
            .map(|o| o.len().div_ceil(config.batch_size))
            .max()
            .unwrap_or(0);
        for slot in 0..max_batches {
            for t in 0..tasks.len() {
                let order = &orders[t];
                let start = slot * config.batch_size;
                if start >= order.len() {
                    continue;
                }
                let batch = &order[start..(start + config.batch_size).min(order.len())];

                assembled[..trunk_len].copy_from_slice(&trunk_params);
                assembled[trunk_len..].copy_from_slice(&head_params[t]);
                scratch[t].set_flat_params(&assembled)?;

                let loss = batch_loss_and_flat_grads(
                    &scratch[t],
                    &task_train[t],
                    batch,
                    None,
                    &mut grads,
                    &mut flat_grads,
                )?;
                if !loss.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite loss at epoch {epoch}, task {t}, slot {slot}"
                    )));
                }
                if config.embedding_weight_decay > 0.0 {
                    for i in layout.embedding.clone() {
                        flat_grads[i] += config.embedding_weight_decay * trunk_params[i];
                    }
                }
                trunk_opt.step(&mut trunk_params, &flat_grads[..trunk_len])?;
                head_opts[t].step(&mut head_params[t], &flat_grads[trunk_len..])?;
            }
        }
    }

    // Materialize the final parameters.
    for t in 0..tasks.len() {
        assembled[..trunk_len].copy_from_slice(&trunk_params);
        assembled[trunk_len..].copy_from_slice(&head_params[t]);
        scratch[t].set_flat_params(&assembled)?;
    }
    let per_task_val_loss = scratch
        .iter()
        .zip(task_val.iter())
        .map(|(m, val)| mean_squared_error(m, val))
        .collect::<Result<Vec<_>>>()?;

    let model = HardSharedModel {
        embedding_table: scratch[0].embedding_table().to_vec(),
        encoder: scratch[0].encoder().clone(),
        heads: scratch.iter().map(|m| m.head().clone()).collect(),
        config: config.clone(),
    };
    Ok(HardSharedOutcome {
        model,
        per_task_val_loss,
    })
}
