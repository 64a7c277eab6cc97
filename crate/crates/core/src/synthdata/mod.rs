//! Reproducible synthetic benchmark for masked-feature regression.
//!
//! Each sample is driven by two latent factors `z1, z2 ~ N(0,1)`. Ten
//! features form three groups: features 1–3 observe `z1` plus sensor noise,
//! features 4–6 observe `z2` plus sensor noise, features 7–10 are pure
//! standard-normal noise. The target is a trigonometric map of the latents
//! whose coefficients live in a [`TaskSpec`]; perturbing those coefficients
//! yields whole families of related tasks for transfer experiments. Features
//! are then dropped independently with a configurable Bernoulli rate.
//!
//! Generation derives one RNG stream per sample index, so datasets are a
//! pure function of the seed no matter how the index space is scheduled.

mod csv_io;

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use csv_io::{read_csv, sidecar_path, write_csv, DatasetMeta};

/// Number of features in the standard benchmark.
pub const BENCHMARK_FEATURES: usize = 10;

/// Group labels for the standard benchmark layout: features 1–3 follow the
/// first latent, 4–6 the second, 7–10 are noise.
pub fn benchmark_group_labels() -> Vec<u8> {
    vec![1, 1, 1, 2, 2, 2, 3, 3, 3, 3]
}

/// How the trigonometric target map is read.
///
/// The sine term is ambiguous between `sin(f_s * pi/4 * (z1+z2))`
/// (`Symmetric`, the default: the frequency scales the whole argument, in
/// structural parallel with the cosine term) and `sin(f_s * pi/4) * (z1+z2)`
/// (`Literal`: the sine of a constant times the latent sum).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Eq1Interpretation {
    #[default]
    Symmetric,
    Literal,
}

/// The two latent factors behind one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentPair {
    pub z1: f64,
    pub z2: f64,
}

/// Coefficients of the target map plus the feature noise level. The
/// four coefficients double as the task's metadata vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub amplitude_sin: f64,
    pub amplitude_cos: f64,
    pub freq_sin: f64,
    pub freq_cos: f64,
    pub noise_sd: f64,
}

impl TaskSpec {
    /// The reference task: all amplitudes and frequencies 1, noise sd 0.1.
    pub fn reference() -> Self {
        Self {
            amplitude_sin: 1.0,
            amplitude_cos: 1.0,
            freq_sin: 1.0,
            freq_cos: 1.0,
            noise_sd: 0.1,
        }
    }

    pub fn with_noise_sd(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    /// Metadata vector: the four map coefficients, in declaration order.
    pub fn metadata(&self) -> Vec<f64> {
        vec![
            self.amplitude_sin,
            self.amplitude_cos,
            self.freq_sin,
            self.freq_cos,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs = [
            self.amplitude_sin,
            self.amplitude_cos,
            self.freq_sin,
            self.freq_cos,
        ];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("non-finite task coefficient".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_sd {} must be finite and >= 0",
                self.noise_sd
            )));
        }
        Ok(())
    }
}

/// One record: feature values, a presence mask, and the scalar target.
///
/// Values at absent positions are undefined and stored as NaN; equality and
/// serialization ignore them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskedSample {
    values: Vec<f64>,
    mask: Vec<bool>,
    target: f64,
}

impl MaskedSample {
    /// Validates the invariants: equal lengths, at least one present entry,
    /// finite values wherever present, finite target. Absent positions are
    /// normalized to NaN.
    pub fn new(values: Vec<f64>, mask: Vec<bool>, target: f64) -> Result<Self> {
        if values.len() != mask.len() {
            return Err(Error::ShapeMismatch(format!(
                "values length {} != mask length {}",
                values.len(),
                mask.len()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::AllFeaturesMissing);
        }
        if !target.is_finite() {
            return Err(Error::Numerical("non-finite target".into()));
        }
        let mut values = values;
        for (v, &m) in values.iter_mut().zip(mask.iter()) {
            if m {
                if !v.is_finite() {
                    return Err(Error::Numerical("non-finite observed feature".into()));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(Self {
            values,
            mask,
            target,
        })
    }

    /// A sample with every feature observed.
    pub fn complete(values: Vec<f64>, target: f64) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(values, mask, target)
    }

    pub fn feature_count(&self) -> usize {
        self.values.len()
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Raw values; NaN at absent positions.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn is_present(&self, index: usize) -> bool {
        self.mask[index]
    }

    /// Observed `(index, value)` pairs in index order.
    pub fn observed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .zip(self.mask.iter())
            .enumerate()
            .filter_map(|(i, (&v, &m))| m.then_some((i, v)))
    }

    pub fn present_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Fraction of features that are absent.
    pub fn missing_fraction(&self) -> f64 {
        1.0 - self.present_count() as f64 / self.feature_count() as f64
    }

    /// Same values/target with a different presence mask.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        Self::new(self.values.clone(), mask, self.target)
    }
}

impl PartialEq for MaskedSample {
    /// Equality over the defined content: masks, targets, and values at
    /// present positions only.
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask
            && self.target == other.target
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .zip(self.mask.iter())
                .all(|((a, b), &m)| !m || a == b)
    }
}

/// A set of samples over a fixed feature space with group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<MaskedSample>,
    pub feature_count: usize,
    /// Group label (1, 2, or 3) per feature index.
    pub group_labels: Vec<u8>,
}

impl Dataset {
    pub fn new(
        samples: Vec<MaskedSample>,
        feature_count: usize,
        group_labels: Vec<u8>,
    ) -> Result<Self> {
        let ds = Self {
            samples,
            feature_count,
            group_labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_count == 0 {
            return Err(Error::InvalidConfig("feature_count must be >= 1".into()));
        }
        if self.group_labels.len() != self.feature_count {
            return Err(Error::ShapeMismatch(format!(
                "group_labels length {} != feature_count {}",
                self.group_labels.len(),
                self.feature_count
            )));
        }
        if self.group_labels.iter().any(|g| !(1..=3).contains(g)) {
            return Err(Error::InvalidConfig("group labels must be 1, 2, or 3".into()));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.feature_count() != self.feature_count {
                return Err(Error::ShapeMismatch(format!(
                    "sample {i} has {} features, dataset has {}",
                    s.feature_count(),
                    self.feature_count
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target()).collect()
    }

    /// Sub-dataset with the given sample indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_count: self.feature_count,
            group_labels: self.group_labels.clone(),
        }
    }
}

/// Evaluates the target map at `(z1, z2)` under the given reading.
pub fn make_target(
    z1: f64,
    z2: f64,
    spec: &TaskSpec,
    interpretation: Eq1Interpretation,
) -> f64 {
    let sum = z1 + z2;
    let diff = z1 - z2;
    let cos_term = spec.amplitude_cos * (spec.freq_cos * 0.7 * PI * diff).cos();
    match interpretation {
        Eq1Interpretation::Symmetric => {
            spec.amplitude_sin * (spec.freq_sin * (PI / 4.0) * sum).sin() + cos_term
        }
        Eq1Interpretation::Literal => {
            spec.amplitude_sin * (spec.freq_sin * PI / 4.0).sin() * sum + cos_term
        }
    }
}

/// Draws the ten benchmark features for one latent pair: groups 1 and 2 are
/// the latents plus `N(0, noise_sd^2)` sensor noise, group 3 is `N(0, 1)`.
pub fn make_features<R: Rng + ?Sized>(z1: f64, z2: f64, noise_sd: f64, rng: &mut R) -> Vec<f64> {
    let mut values = Vec::with_capacity(BENCHMARK_FEATURES);
    let noise = |rng: &mut R| -> f64 {
        if noise_sd > 0.0 {
            Normal::new(0.0, noise_sd).expect("validated noise sd").sample(rng)
        } else {
            0.0
        }
    };
    for _ in 0..3 {
        values.push(z1 + noise(rng));
    }
    for _ in 0..3 {
        values.push(z2 + noise(rng));
    }
    for _ in 0..4 {
        let x: f64 = rng.sample(StandardNormal);
        values.push(x);
    }
    values
}

/// Draws a presence mask of length `k`: each feature is absent independently
/// with probability `p_miss`. All-absent draws are rejected and redrawn, so
/// the returned mask always has at least one present entry.
pub fn apply_missing_mask<R: Rng + ?Sized>(k: usize, p_miss: f64, rng: &mut R) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&p_miss) {
        return Err(Error::InvalidConfig(format!(
            "p_miss {p_miss} must lie in [0, 1)"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("mask length must be >= 1".into()));
    }
    loop {
        let mask: Vec<bool> = (0..k).map(|_| !rng.random_bool(p_miss)).collect();
        if mask.iter().any(|&m| m) {
            return Ok(mask);
        }
    }
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stream 0 is left for non-sample draws by callers sharing the seed.
    rng.set_stream(index + 1);
    rng
}

/// Generates `n` samples of the benchmark for `spec`: latents, features,
/// target, then the missingness mask. Deterministic in `seed`, independent
/// of evaluation order (one RNG stream per sample index).
pub fn generate_dataset(
    n: usize,
    spec: &TaskSpec,
    p_miss: f64,
    interpretation: Eq1Interpretation,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidConfig("dataset size must be >= 1".into()));
    }
    spec.validate()?;
    if !(0.0..1.0).contains(&p_miss) {
        return Err(Error::InvalidConfig(format!(
            "p_miss {p_miss} must lie in [0, 1)"
        )));
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = sample_rng(seed, i as u64);
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let values = make_features(z1, z2, spec.noise_sd, &mut rng);
        let target = make_target(z1, z2, spec, interpretation);
        let mask = apply_missing_mask(BENCHMARK_FEATURES, p_miss, &mut rng)?;
        samples.push(MaskedSample::new(values, mask, target)?);
    }
    Dataset::new(samples, BENCHMARK_FEATURES, benchmark_group_labels())
}

/// Redraws the missingness masks of `dataset` at rate `p_miss`, keeping
/// values and targets. The input must be fully observed (masking an already
/// masked dataset would have to invent values).
pub fn mask_dataset(dataset: &Dataset, p_miss: f64, seed: u64) -> Result<Dataset> {
    let mut samples = Vec::with_capacity(dataset.len());
    for (i, s) in dataset.samples.iter().enumerate() {
        if !s.is_complete() {
            return Err(Error::Contract(format!(
                "mask_dataset requires fully observed input, sample {i} has missing features"
            )));
        }
        let mut rng = sample_rng(seed, i as u64);
        let mask = apply_missing_mask(s.feature_count(), p_miss, &mut rng)?;
        samples.push(s.with_mask(mask)?);
    }
    Dataset::new(samples, dataset.feature_count, dataset.group_labels.clone())
}

/// Controls task-family generation for transfer scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    pub n_tasks: usize,
    /// Half-width of the uniform perturbation added to each coefficient.
    pub perturbation_scale: f64,
    pub samples_per_task: usize,
    pub p_miss: f64,
    pub interpretation: Eq1Interpretation,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            n_tasks: 5,
            perturbation_scale: 0.1,
            samples_per_task: 400,
            p_miss: 0.2,
            interpretation: Eq1Interpretation::Symmetric,
        }
    }
}

/// Spawns `n_tasks` perturbed variants of `base`, each with its own dataset.
/// Coefficients move by `Uniform(-scale, +scale)`; the metadata of each task
/// is exactly its coefficient vector, so metadata distance mirrors task
/// distance by construction.
pub fn generate_task_family(
    base: &TaskSpec,
    config: &FamilyConfig,
    seed: u64,
) -> Result<Vec<(TaskSpec, Dataset)>> {
    if config.n_tasks < 2 {
        return Err(Error::InvalidConfig("task family needs at least 2 tasks".into()));
    }
    if !(config.perturbation_scale >= 0.0 && config.perturbation_scale.is_finite()) {
        return Err(Error::InvalidConfig("perturbation_scale must be finite and >= 0".into()));
    }
    base.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut family = Vec::with_capacity(config.n_tasks);
    for t in 0..config.n_tasks {
        let mut perturb = |c: f64| {
            if config.perturbation_scale > 0.0 {
                c + rng.random_range(-config.perturbation_scale..config.perturbation_scale)
            } else {
                c
            }
        };
        let spec = TaskSpec {
            amplitude_sin: perturb(base.amplitude_sin),
            amplitude_cos: perturb(base.amplitude_cos),
            freq_sin: perturb(base.freq_sin),
            freq_cos: perturb(base.freq_cos),
            noise_sd: base.noise_sd,
        };
        let dataset = generate_dataset(
            config.samples_per_task,
            &spec,
            config.p_miss,
            config.interpretation,
            seed.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(t as u64 + 1),
        )?;
        family.push((spec, dataset));
    }
    Ok(family)
}

#[cfg(test)]
mod tests;
