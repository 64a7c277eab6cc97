//! The feature-embedding regression model.
//!
//! Every feature index owns a learned embedding row. An observed feature is
//! encoded as `encoder([embedding_row, value])` by one shared encoder, the
//! codes of the *present* features are mean-pooled, and a small head maps the
//! pooled code to the prediction. Absent features simply never enter the
//! pool, so the model accepts any non-empty subset of sensors without
//! imputation, and the pooled code is independent of how many features were
//! available.

use std::ops::Range;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::{Activation, Mlp, MlpGrads, OptimizerConfig};
use crate::synthdata::MaskedSample;
use crate::{Error, Result};

/// Architecture and training settings for [`FeatureEmbeddingModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedNetConfig {
    /// Embedding width per feature index.
    pub embedding_dim: usize,
    pub encoder_hidden: Vec<usize>,
    /// Width of the per-feature code and of the pooled representation.
    pub code_dim: usize,
    pub head_hidden: Vec<usize>,
    /// Hidden-layer activation; output layers are always linear.
    pub activation: Activation,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub train_fraction: f64,
    /// L2 penalty on the embedding table. Pulls embeddings of features with
    /// the same role onto shared positions and parks unused features near the
    /// origin, which is what makes the embedding plot cluster.
    pub embedding_weight_decay: f64,
    /// The learning rate anneals linearly from `lr` to `lr * final_lr_fraction`
    /// over the epochs. 1.0 means constant.
    pub final_lr_fraction: f64,
}

impl Default for EmbedNetConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 2,
            encoder_hidden: vec![32, 32],
            code_dim: 16,
            head_hidden: vec![32],
            activation: Activation::Relu,
            optimizer: OptimizerConfig::Adam(crate::numcore::AdamConfig {
                lr: 3e-3,
                ..crate::numcore::AdamConfig::default()
            }),
            epochs: 300,
            batch_size: 32,
            seed: 0,
            train_fraction: 0.8,
            embedding_weight_decay: 5e-2,
            final_lr_fraction: 0.1,
        }
    }
}

impl EmbedNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embedding_dim == 0 || self.code_dim == 0 {
            return Err(Error::InvalidConfig("embedding_dim and code_dim must be >= 1".into()));
        }
        if self.encoder_hidden.iter().chain(self.head_hidden.iter()).any(|&w| w == 0) {
            return Err(Error::InvalidConfig("hidden widths must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        if !(self.embedding_weight_decay >= 0.0 && self.embedding_weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(
                "embedding_weight_decay must be finite and >= 0".into(),
            ));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "final_lr_fraction must lie in (0, 1]".into(),
            ));
        }
        self.optimizer.validate()
    }
}

/// Slices of the flat parameter vector belonging to each block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub embedding: Range<usize>,
    pub encoder: Range<usize>,
    pub head: Range<usize>,
}

/// Embedding table + shared feature encoder + prediction head.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEmbeddingModel {
    embedding_table: Vec<Vec<f64>>,
    encoder: Mlp,
    head: Mlp,
    config: EmbedNetConfig,
}

impl FeatureEmbeddingModel {
    /// Seeded initialization for `feature_count` features. Embedding rows use
    /// Xavier-uniform over `sqrt(6 / (K + d_e))`; layers follow their
    /// activation's scheme.
    pub fn new(feature_count: usize, config: EmbedNetConfig) -> Result<Self> {
        config.validate()?;
        if feature_count == 0 {
            return Err(Error::InvalidConfig("feature_count must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let limit = (6.0 / (feature_count as f64 + config.embedding_dim as f64)).sqrt();
        let dist = Uniform::new(-limit, limit)
            .map_err(|e| Error::InvalidConfig(format!("embedding init: {e}")))?;
        let embedding_table: Vec<Vec<f64>> = (0..feature_count)
            .map(|_| (0..config.embedding_dim).map(|_| dist.sample(&mut rng)).collect())
            .collect();

        let encoder = Mlp::init(
            config.embedding_dim + 1,
            &config.encoder_hidden,
            config.code_dim,
            config.activation,
            Activation::Identity,
            &mut rng,
        )?;
        let head = Mlp::init(
            config.code_dim,
            &config.head_hidden,
            1,
            config.activation,
            Activation::Identity,
            &mut rng,
        )?;
        Self::from_parts(embedding_table, encoder, head, config)
    }

    /// Assembles a model from explicit parts, checking all invariants.
    pub fn from_parts(
        embedding_table: Vec<Vec<f64>>,
        encoder: Mlp,
        head: Mlp,
        config: EmbedNetConfig,
    ) -> Result<Self> {
        config.validate()?;
        if embedding_table.is_empty() {
            return Err(Error::ShapeMismatch("empty embedding table".into()));
        }
        if embedding_table.iter().any(|r| r.len() != config.embedding_dim) {
            return Err(Error::ShapeMismatch(format!(
                "embedding rows must have width {}",
                config.embedding_dim
            )));
        }
        if embedding_table.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite embedding entry".into()));
        }
        if encoder.input_dim() != config.embedding_dim + 1 {
            return Err(Error::ShapeMismatch(format!(
                "encoder input dim {} != embedding_dim + 1 = {}",
                encoder.input_dim(),
                config.embedding_dim + 1
            )));
        }
        if encoder.output_dim() != config.code_dim {
            return Err(Error::ShapeMismatch(format!(
                "encoder output dim {} != code_dim {}",
                encoder.output_dim(),
                config.code_dim
            )));
        }
        if head.input_dim() != config.code_dim || head.output_dim() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "head must map code_dim {} to 1, got {} to {}",
                config.code_dim,
                head.input_dim(),
                head.output_dim()
            )));
        }
        Ok(Self {
            embedding_table,
            encoder,
            head,
            config,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.embedding_table.len()
    }

    pub fn config(&self) -> &EmbedNetConfig {
        &self.config
    }

    pub fn embedding_table(&self) -> &[Vec<f64>] {
        &self.embedding_table
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn head(&self) -> &Mlp {
        &self.head
    }

    /// Overwrites one embedding row (e.g. to seed a new sensor).
    pub fn set_embedding_row(&mut self, index: usize, row: Vec<f64>) -> Result<()> {
        if index >= self.feature_count() {
            return Err(Error::Contract(format!(
                "feature index {index} out of range (K = {})",
                self.feature_count()
            )));
        }
        if row.len() != self.config.embedding_dim || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("bad embedding row".into()));
        }
        self.embedding_table[index] = row;
        Ok(())
    }

    /// Encodes one observed feature: `encoder([embedding_row, value])`.
    pub fn encode_feature(&self, index: usize, value: f64) -> Result<Vec<f64>> {
        if index >= self.feature_count() {
            return Err(Error::Contract(format!(
                "feature index {index} out of range (K = {})",
                self.feature_count()
            )));
        }
        if !value.is_finite() {
            return Err(Error::Numerical(format!("non-finite value for feature {index}")));
        }
        let mut input = Vec::with_capacity(self.config.embedding_dim + 1);
        input.extend_from_slice(&self.embedding_table[index]);
        input.push(value);
        self.encoder.infer(&input)
    }

    /// Pooled pre-head representation of a sample: the mean code over its
    /// present features.
    pub fn pooled_code(&self, sample: &MaskedSample) -> Result<Vec<f64>> {
        self.check_sample(sample)?;
        let mut codes = Vec::with_capacity(sample.present_count());
        for (i, v) in sample.observed() {
            codes.push(self.encode_feature(i, v)?);
        }
        let mask = vec![true; codes.len()];
        masked_global_pool(&codes, &mask)
    }

    /// Model output for a sample.
    pub fn predict(&self, sample: &MaskedSample) -> Result<f64> {
        let pooled = self.pooled_code(sample)?;
        Ok(self.head.infer(&pooled)?[0])
    }

    pub(crate) fn check_sample(&self, sample: &MaskedSample) -> Result<()> {
        if sample.feature_count() != self.feature_count() {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} features, model expects {}",
                sample.feature_count(),
                self.feature_count()
            )));
        }
        if sample.present_count() == 0 {
            return Err(Error::AllFeaturesMissing);
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.feature_count() * self.config.embedding_dim
            + self.encoder.param_count()
            + self.head.param_count()
    }

    /// Block boundaries inside the flat parameter vector, ordered
    /// embedding | encoder | head.
    pub fn param_layout(&self) -> ParamLayout {
        let e = self.feature_count() * self.config.embedding_dim;
        let enc = self.encoder.param_count();
        let h = self.head.param_count();
        ParamLayout {
            embedding: 0..e,
            encoder: e..e + enc,
            head: e + enc..e + enc + h,
        }
    }

    /// All parameters as one flat vector (see [`Self::param_layout`]).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for row in &self.embedding_table {
            out.extend_from_slice(row);
        }
        self.encoder.flatten_params_into(&mut out);
        self.head.flatten_params_into(&mut out);
        out
    }

    /// Inverse of [`Self::flat_params`].
    pub fn set_flat_params(&mut self, src: &[f64]) -> Result<()> {
        if src.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "flat parameter length {} != parameter count {}",
                src.len(),
                self.param_count()
            )));
        }
        let layout = self.param_layout();
        let d_e = self.config.embedding_dim;
        for (i, row) in self.embedding_table.iter_mut().enumerate() {
            let start = layout.embedding.start + i * d_e;
            row.copy_from_slice(&src[start..start + d_e]);
        }
        self.encoder.assign_params(&src[layout.encoder.clone()])?;
        self.head.assign_params(&src[layout.head.clone()])?;
        Ok(())
    }
}

/// Arithmetic mean over the codes whose mask entry is true, taken in index
/// order. The result does not depend on how many features are present, only
/// on which.
pub fn masked_global_pool(codes: &[Vec<f64>], mask: &[bool]) -> Result<Vec<f64>> {
    if codes.len() != mask.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} codes vs {} mask entries",
            codes.len(),
            mask.len()
        )));
    }
    let mut sum: Option<Vec<f64>> = None;
    let mut count = 0usize;
    for (code, &m) in codes.iter().zip(mask.iter()) {
        if !m {
            continue;
        }
        match &mut sum {
            None => sum = Some(code.clone()),
            Some(acc) => {
                if acc.len() != code.len() {
                    return Err(Error::ShapeMismatch("codes of unequal width".into()));
                }
                for (a, &c) in acc.iter_mut().zip(code.iter()) {
                    *a += c;
                }
            }
        }
        count += 1;
    }
    let mut pooled = sum.ok_or(Error::AllFeaturesMissing)?;
    let inv = 1.0 / count as f64;
    pooled.iter_mut().for_each(|v| *v *= inv);
    Ok(pooled)
}

/// Gradients for every block of a [`FeatureEmbeddingModel`], parameter-shaped.
#[derive(Debug, Clone)]
pub(crate) struct ModelGrads {
    /// Flat `K * d_e`, row-major by feature index.
    pub d_embedding: Vec<f64>,
    pub d_encoder: MlpGrads,
    pub d_head: MlpGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &FeatureEmbeddingModel) -> Self {
        Self {
            d_embedding: vec![0.0; model.feature_count() * model.config.embedding_dim],
            d_encoder: MlpGrads::zeros_like(&model.encoder),
            d_head: MlpGrads::zeros_like(&model.head),
        }
    }

    pub fn zero(&mut self) {
        self.d_embedding.iter_mut().for_each(|v| *v = 0.0);
        self.d_encoder.zero();
        self.d_head.zero();
    }

    /// Appends all gradients in the flat-parameter order.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.d_embedding);
        self.d_encoder.flatten_into(out);
        self.d_head.flatten_into(out);
    }
}

/// Forward state for one sample, kept for the backward pass.
pub(crate) struct SampleForward {
    pub present: Vec<usize>,
    pub enc_tapes: Vec<crate::numcore::Tape>,
    pub head_tape: crate::numcore::Tape,
    pub prediction: f64,
}

impl FeatureEmbeddingModel {
    pub(crate) fn forward_sample(&self, sample: &MaskedSample) -> Result<SampleForward> {
        self.check_sample(sample)?;
        let mut present = Vec::with_capacity(sample.present_count());
        let mut enc_tapes = Vec::with_capacity(sample.present_count());
        let mut codes = Vec::with_capacity(sample.present_count());
        let mut input = vec![0.0; self.config.embedding_dim + 1];
        for (i, v) in sample.observed() {
            input[..self.config.embedding_dim].copy_from_slice(&self.embedding_table[i]);
            input[self.config.embedding_dim] = v;
            let (code, tape) = self.encoder.forward(&input)?;
            present.push(i);
            enc_tapes.push(tape);
            codes.push(code);
        }
        let mask = vec![true; codes.len()];
        let pooled = masked_global_pool(&codes, &mask)?;
        let (out, head_tape) = self.head.forward(&pooled)?;
        Ok(SampleForward {
            present,
            enc_tapes,
            head_tape,
            prediction: out[0],
        })
    }

    /// Accumulates `d_pred * d(prediction)/d(params)` into `grads`.
    pub(crate) fn backward_sample(
        &self,
        fwd: &SampleForward,
        d_pred: f64,
        grads: &mut ModelGrads,
    ) -> Result<()> {
        let d_pooled = self
            .head
            .backward_acc(&fwd.head_tape, &[d_pred], &mut grads.d_head)?;
        let m = fwd.present.len() as f64;
        let d_code: Vec<f64> = d_pooled.iter().map(|&g| g / m).collect();
        let d_e = self.config.embedding_dim;
        for (&i, tape) in fwd.present.iter().zip(fwd.enc_tapes.iter()) {
            let d_input = self.encoder.backward_acc(tape, &d_code, &mut grads.d_encoder)?;
            let row = &mut grads.d_embedding[i * d_e..(i + 1) * d_e];
            for (r, &g) in row.iter_mut().zip(d_input.iter()) {
                *r += g;
            }
            // d_input[d_e] is the gradient w.r.t. the raw value; unused.
        }
        Ok(())
    }
}
