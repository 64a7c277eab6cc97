//! Domain-similarity measures and the when-to-transfer gate.

use super::{GateReport, GateThresholds, TaskDescriptor};
use crate::embednet::FeatureEmbeddingModel;
use crate::synthdata::Dataset;
use crate::{Error, Result};

/// Gaussian-kernel bandwidth selection for [`mmd_similarity`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Median of all pairwise distances over the pooled samples.
    Auto,
    Fixed(f64),
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn median_pairwise_distance(points: &[&[f64]]) -> f64 {
    let mut dists = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            dists.push(sq_dist(points[i], points[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Squared maximum mean discrepancy between two sample sets, using the
/// biased (V-statistic) estimator with a Gaussian kernel
/// `k(x,y) = exp(-|x-y|^2 / (2 sigma^2))`.
///
/// Zero on identical multisets; grows toward 2 for well-separated sets.
pub fn mmd_similarity(a: &[Vec<f64>], b: &[Vec<f64>], bandwidth: Bandwidth) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Contract("mmd needs non-empty sample sets".into()));
    }
    let dim = a[0].len();
    if a.iter().chain(b.iter()).any(|v| v.len() != dim) {
        return Err(Error::ShapeMismatch("mmd samples of unequal dimension".into()));
    }
    let sigma = match bandwidth {
        Bandwidth::Fixed(s) => {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidConfig(format!("bandwidth {s} must be > 0")));
            }
            s
        }
        Bandwidth::Auto => {
            let pooled: Vec<&[f64]> = a.iter().chain(b.iter()).map(|v| v.as_slice()).collect();
            median_pairwise_distance(&pooled)
        }
    };
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let kernel_mean = |xs: &[Vec<f64>], ys: &[Vec<f64>]| -> f64 {
        let mut sum = 0.0;
        for x in xs {
            for y in ys {
                sum += (-gamma * sq_dist(x, y)).exp();
            }
        }
        sum / (xs.len() * ys.len()) as f64
    };
    let mmd2 = kernel_mean(a, a) + kernel_mean(b, b) - 2.0 * kernel_mean(a, b);
    // The V-statistic is non-negative up to rounding; clamp the dust.
    Ok(mmd2.max(0.0))
}

/// Cosine similarity between metadata vectors, in [-1, 1].
pub fn metadata_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "metadata lengths {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Contract("empty metadata vectors".into()));
    }
    let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let na2: f64 = a.iter().map(|x| x * x).sum();
    let nb2: f64 = b.iter().map(|x| x * x).sum();
    if na2 == 0.0 || nb2 == 0.0 {
        return Err(Error::Contract("cosine similarity of a zero vector".into()));
    }
    if a == b {
        // Exact by definition; the quotient below only gets there up to
        // rounding.
        return Ok(1.0);
    }
    Ok((dot / (na2 * nb2).sqrt()).clamp(-1.0, 1.0))
}

/// Sample vectors for similarity: pooled codes through `extractor` when
/// given (works on masked data), raw feature vectors otherwise (requires
/// complete samples).
fn feature_vectors(
    dataset: &Dataset,
    extractor: Option<&FeatureEmbeddingModel>,
) -> Result<Vec<Vec<f64>>> {
    match extractor {
        Some(model) => dataset.samples.iter().map(|s| model.pooled_code(s)).collect(),
        None => dataset
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if !s.is_complete() {
                    return Err(Error::Contract(format!(
                        "raw-vector similarity requires complete samples; sample {i} has missing features"
                    )));
                }
                Ok(s.values().to_vec())
            })
            .collect(),
    }
}

/// Computes the gate: feature similarity `exp(-mmd^2)` over feature vectors,
/// metadata cosine, and (only when `thresholds.tau_label` is set) label
/// similarity over the target values. The decision is the conjunction of the
/// enabled threshold checks.
pub fn when_to_transfer(
    source: &TaskDescriptor,
    target: &TaskDescriptor,
    thresholds: &GateThresholds,
    extractor: Option<&FeatureEmbeddingModel>,
) -> Result<GateReport> {
    source.validate()?;
    target.validate()?;
    let src_vecs = feature_vectors(&source.dataset, extractor)?;
    let tgt_vecs = feature_vectors(&target.dataset, extractor)?;
    let feature_similarity = (-mmd_similarity(&src_vecs, &tgt_vecs, Bandwidth::Auto)?).exp();
    let metadata = metadata_similarity(&source.metadata, &target.metadata)?;

    let label_similarity = match thresholds.tau_label {
        None => None,
        Some(_) => {
            let src_y: Vec<Vec<f64>> =
                source.dataset.targets().into_iter().map(|y| vec![y]).collect();
            let tgt_y: Vec<Vec<f64>> =
                target.dataset.targets().into_iter().map(|y| vec![y]).collect();
            Some((-mmd_similarity(&src_y, &tgt_y, Bandwidth::Auto)?).exp())
        }
    };

    let mut decision = feature_similarity >= thresholds.tau_feature
        && metadata >= thresholds.tau_metadata;
    if let (Some(tau), Some(sim)) = (thresholds.tau_label, label_similarity) {
        decision = decision && sim >= tau;
    }
    Ok(GateReport {
        feature_similarity,
        label_similarity,
        metadata_similarity: metadata,
        gate_decision: decision,
    })
}
