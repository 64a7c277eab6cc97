//! Instance transfer: density-ratio weights for source samples.
//!
//! A logistic-regression classifier is trained (full batch, deterministic)
//! to separate source codes (label 0) from target codes (label 1). The
//! density ratio `p(target|x) / p(source|x)` becomes the source-sample
//! weight, clipped and renormalized to mean 1.

use serde::{Deserialize, Serialize};

use crate::embednet::FeatureEmbeddingModel;
use crate::numcore::{AdamConfig, AdamState};
use crate::synthdata::Dataset;
use crate::{Error, Result};

// Spec'd at the module level: transfer::weighted_train is the per-sample
// weighted variant of ordinary training.
pub use crate::embednet::train_weighted as weighted_train;

/// Settings for the density-ratio classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReweightConfig {
    pub iterations: usize,
    pub lr: f64,
    /// L2 penalty on the classifier weights (bias excluded).
    pub l2: f64,
    pub clip_min: f64,
    pub clip_max: f64,
}

impl Default for ReweightConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            lr: 0.1,
            l2: 1e-2,
            clip_min: 0.05,
            clip_max: 20.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Density-ratio weights for every source sample: `w(x) = p(target|x) /
/// p(source|x)`, clipped to `[clip_min, clip_max]`, then renormalized to
/// mean 1. Codes come from `extractor`, so masked samples are handled
/// natively.
pub fn instance_reweight(
    source: &Dataset,
    target: &Dataset,
    extractor: &FeatureEmbeddingModel,
    config: &ReweightConfig,
) -> Result<Vec<f64>> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::Contract("instance_reweight needs non-empty datasets".into()));
    }
    if !(config.clip_min > 0.0 && config.clip_max > config.clip_min) {
        return Err(Error::InvalidConfig("bad clip range".into()));
    }
    let src_codes: Vec<Vec<f64>> = source
        .samples
        .iter()
        .map(|s| extractor.pooled_code(s))
        .collect::<Result<_>>()?;
    let tgt_codes: Vec<Vec<f64>> = target
        .samples
        .iter()
        .map(|s| extractor.pooled_code(s))
        .collect::<Result<_>>()?;
    let dim = src_codes[0].len();

    // Logistic regression on [code, 1] with Adam, weights initialized to 0.
    let n_total = (src_codes.len() + tgt_codes.len()) as f64;
    let mut params = vec![0.0; dim + 1];
    let mut grads = vec![0.0; dim + 1];
    let mut opt = AdamState::new(
        params.len(),
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    )?;
    for _ in 0..config.iterations {
        grads.iter_mut().for_each(|g| *g = 0.0);
        for (codes, label) in [(&src_codes, 0.0), (&tgt_codes, 1.0)] {
            for code in codes.iter() {
                let z = params[dim]
                    + code.iter().zip(params.iter()).map(|(x, w)| x * w).sum::<f64>();
                let delta = (sigmoid(z) - label) / n_total;
                for (g, &x) in grads.iter_mut().zip(code.iter()) {
                    *g += delta * x;
                }
                grads[dim] += delta;
            }
        }
        for i in 0..dim {
            grads[i] += config.l2 * params[i];
        }
        opt.step(&mut params, &grads)?;
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Numerical("density-ratio classifier diverged".into()));
    }

    let mut weights: Vec<f64> = src_codes
        .iter()
        .map(|code| {
            let z = params[dim]
                + code.iter().zip(params.iter()).map(|(x, w)| x * w).sum::<f64>();
            let p = sigmoid(z);
            (p / (1.0 - p)).clamp(config.clip_min, config.clip_max)
        })
        .collect();
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::Numerical("degenerate weight normalization".into()));
    }
    weights.iter_mut().for_each(|w| *w /= mean);
    Ok(weights)
}
