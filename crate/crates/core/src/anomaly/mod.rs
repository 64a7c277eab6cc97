//! Anomaly detection through a Model of Normality.
//!
//! A trained feature-embedding network acts as the feature extractor; its
//! pooled pre-head code summarizes each sample. A normality model is fitted
//! on codes of anomaly-free data, a decision threshold is calibrated as a
//! quantile of held-out normal scores, and new samples are flagged when
//! their score exceeds it. Synthetic anomalies for pipeline evaluation are
//! injected by shifting observed group-1 features.

mod evaluate;
mod mon;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embednet::FeatureEmbeddingModel;
use crate::synthdata::{Dataset, MaskedSample};
use crate::{Error, Result};

pub use evaluate::{evaluate, EvalMetrics};
pub use mon::{calibrate_threshold, fit_mon, score, ModelOfNormality, MonConfig, MonMode};

/// Pipeline settings: normality model, calibration quantile, and whether the
/// sample's missing-fraction joins the code as an extra coordinate (making
/// unusual missingness patterns scoreable).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyConfig {
    pub mon: MonConfig,
    pub quantile: f64,
    pub append_missing_fraction: bool,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        Self {
            mon: MonConfig::default(),
            quantile: 0.99,
            append_missing_fraction: false,
        }
    }
}

/// The pooled pre-head representation of a sample; the same vector
/// `predict` feeds into the head.
pub fn extract_features(
    model: &FeatureEmbeddingModel,
    sample: &MaskedSample,
) -> Result<Vec<f64>> {
    model.pooled_code(sample)
}

/// A feature extractor bound to its configuration.
#[derive(Debug, Clone, Copy)]
pub struct CodeExtractor<'a> {
    pub model: &'a FeatureEmbeddingModel,
    pub append_missing_fraction: bool,
}

impl<'a> CodeExtractor<'a> {
    pub fn new(model: &'a FeatureEmbeddingModel, config: &AnomalyConfig) -> Self {
        Self {
            model,
            append_missing_fraction: config.append_missing_fraction,
        }
    }

    pub fn extract(&self, sample: &MaskedSample) -> Result<Vec<f64>> {
        let mut code = extract_features(self.model, sample)?;
        if self.append_missing_fraction {
            code.push(sample.missing_fraction());
        }
        Ok(code)
    }

    pub fn extract_all(&self, samples: &[MaskedSample]) -> Result<Vec<Vec<f64>>> {
        samples.iter().map(|s| self.extract(s)).collect()
    }
}

/// One per-sample verdict; `is_anomaly` is exactly `score > threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnomalyDecision {
    pub score: f64,
    pub threshold: f64,
    pub is_anomaly: bool,
}

/// Scores every sample through the extractor and compares to the threshold.
pub fn detect(
    mon: &ModelOfNormality,
    threshold: f64,
    samples: &[MaskedSample],
    extractor: &CodeExtractor,
) -> Result<Vec<AnomalyDecision>> {
    samples
        .iter()
        .map(|sample| {
            let code = extractor.extract(sample)?;
            let s = score(mon, &code)?;
            Ok(AnomalyDecision {
                score: s,
                threshold,
                is_anomaly: s > threshold,
            })
        })
        .collect()
}

/// Injects synthetic anomalies: each sample is independently selected with
/// probability `fraction`, and its *observed* group-1 features are shifted
/// by `shift_sd_multiples` empirical standard deviations. Returns the new
/// dataset and the truth labels (true = injected).
///
/// A selected sample with no observed group-1 features keeps its values but
/// is still labeled anomalous; at the benchmark missingness rate this is a
/// sub-percent sliver of the positives.
pub fn inject_anomalies(
    dataset: &Dataset,
    fraction: f64,
    shift_sd_multiples: f64,
    seed: u64,
) -> Result<(Dataset, Vec<bool>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "anomaly fraction {fraction} must lie in (0, 1)"
        )));
    }
    if !shift_sd_multiples.is_finite() {
        return Err(Error::InvalidConfig("shift must be finite".into()));
    }
    dataset.validate()?;

    // Per-feature empirical sd over observed entries.
    let k = dataset.feature_count;
    let mut sums = vec![0.0; k];
    let mut sq_sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for s in &dataset.samples {
        for (i, v) in s.observed() {
            sums[i] += v;
            sq_sums[i] += v * v;
            counts[i] += 1;
        }
    }
    let sds: Vec<f64> = (0..k)
        .map(|i| {
            if counts[i] < 2 {
                return 0.0;
            }
            let n = counts[i] as f64;
            let mean = sums[i] / n;
            ((sq_sums[i] - n * mean * mean) / (n - 1.0)).max(0.0).sqrt()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for s in &dataset.samples {
        let inject = rng.random_bool(fraction);
        labels.push(inject);
        if !inject {
            samples.push(s.clone());
            continue;
        }
        let mut values = s.values().to_vec();
        for (i, v) in s.observed() {
            if dataset.group_labels[i] == 1 {
                values[i] = v + shift_sd_multiples * sds[i];
            }
        }
        samples.push(MaskedSample::new(values, s.mask().to_vec(), s.target())?);
    }
    let injected = Dataset::new(samples, k, dataset.group_labels.clone())?;
    Ok((injected, labels))
}

#[cfg(test)]
mod tests;
