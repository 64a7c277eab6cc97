//! The Model of Normality: a statistical summary of anomaly-free codes.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which normality model to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonMode {
    Mahalanobis,
    Knn,
}

/// Settings for [`fit_mon`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonConfig {
    pub mode: MonMode,
    /// Ridge added to the covariance (mahalanobis mode).
    pub lambda: f64,
    /// Neighbor count (knn mode).
    pub k: usize,
}

impl Default for MonConfig {
    fn default() -> Self {
        Self {
            mode: MonMode::Mahalanobis,
            lambda: 1e-4,
            k: 5,
        }
    }
}

/// Fitted normality model. Immutable after fitting; scoring is read-only.
#[derive(Debug, Clone)]
pub enum ModelOfNormality {
    Mahalanobis {
        mean: Vec<f64>,
        /// Regularized covariance `S + lambda I`.
        covariance: Vec<Vec<f64>>,
        lambda: f64,
        /// Cached lower Cholesky factor of the regularized covariance.
        chol: Vec<Vec<f64>>,
    },
    Knn {
        gallery: Vec<Vec<f64>>,
        k: usize,
    },
}

fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(Error::Numerical(
                        "regularized covariance is not positive definite".into(),
                    ));
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(l)
}

fn forward_solve(l: &[Vec<f64>], d: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = d[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    y
}

impl ModelOfNormality {
    /// Builds a mahalanobis model from explicit moments; `covariance` is the
    /// raw (unregularized) covariance.
    pub fn mahalanobis_from_moments(
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
        lambda: f64,
    ) -> Result<Self> {
        let d = mean.len();
        if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
            return Err(Error::ShapeMismatch("covariance must be d x d".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda {lambda} must be > 0")));
        }
        let mut regularized = covariance;
        for (i, row) in regularized.iter_mut().enumerate() {
            row[i] += lambda;
        }
        let chol = cholesky(&regularized)?;
        Ok(ModelOfNormality::Mahalanobis {
            mean,
            covariance: regularized,
            lambda,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ModelOfNormality::Mahalanobis { mean, .. } => mean.len(),
            ModelOfNormality::Knn { gallery, .. } => gallery[0].len(),
        }
    }

    pub fn mode(&self) -> MonMode {
        match self {
            ModelOfNormality::Mahalanobis { .. } => MonMode::Mahalanobis,
            ModelOfNormality::Knn { .. } => MonMode::Knn,
        }
    }
}

/// Fits a normality model on anomaly-free codes. Mahalanobis mode needs at
/// least 2 codes (sample covariance, denominator n-1); knn mode needs at
/// least `k`.
pub fn fit_mon(normal_codes: &[Vec<f64>], config: &MonConfig) -> Result<ModelOfNormality> {
    if normal_codes.is_empty() {
        return Err(Error::Contract("no codes to fit on".into()));
    }
    let d = normal_codes[0].len();
    if normal_codes.iter().any(|c| c.len() != d) {
        return Err(Error::ShapeMismatch("codes of unequal dimension".into()));
    }
    match config.mode {
        MonMode::Mahalanobis => {
            let n = normal_codes.len();
            if n < 2 {
                return Err(Error::Contract(
                    "mahalanobis mode needs at least 2 codes".into(),
                ));
            }
            let mut mean = vec![0.0; d];
            for code in normal_codes {
                for (m, &c) in mean.iter_mut().zip(code.iter()) {
                    *m += c;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            let mut cov = vec![vec![0.0; d]; d];
            for code in normal_codes {
                for i in 0..d {
                    let di = code[i] - mean[i];
                    for j in 0..=i {
                        cov[i][j] += di * (code[j] - mean[j]);
                    }
                }
            }
            for i in 0..d {
                for j in 0..=i {
                    cov[i][j] /= (n - 1) as f64;
                    cov[j][i] = cov[i][j];
                }
            }
            ModelOfNormality::mahalanobis_from_moments(mean, cov, config.lambda)
        }
        MonMode::Knn => {
            if config.k == 0 || normal_codes.len() < config.k {
                return Err(Error::Contract(format!(
                    "knn mode needs a gallery of at least k = {} codes, got {}",
                    config.k,
                    normal_codes.len()
                )));
            }
            Ok(ModelOfNormality::Knn {
                gallery: normal_codes.to_vec(),
                k: config.k,
            })
        }
    }
}

/// Anomaly score of one code: the Mahalanobis distance
/// `sqrt((c-mean)^T (S+lambda I)^-1 (c-mean))`, or the mean Euclidean
/// distance to the k nearest gallery codes. Non-negative, and monotone in
/// the distance from normality.
pub fn score(mon: &ModelOfNormality, code: &[f64]) -> Result<f64> {
    if code.len() != mon.dim() {
        return Err(Error::ShapeMismatch(format!(
            "code dim {} != model dim {}",
            code.len(),
            mon.dim()
        )));
    }
    match mon {
        ModelOfNormality::Mahalanobis { mean, chol, .. } => {
            let d: Vec<f64> = code.iter().zip(mean.iter()).map(|(c, m)| c - m).collect();
            let y = forward_solve(chol, &d);
            Ok(y.iter().map(|v| v * v).sum::<f64>().sqrt())
        }
        ModelOfNormality::Knn { gallery, k } => {
            let mut dists: Vec<f64> = gallery
                .iter()
                .map(|g| {
                    g.iter()
                        .zip(code.iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            dists.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            Ok(dists[..*k].iter().sum::<f64>() / *k as f64)
        }
    }
}

/// Decision threshold: the empirical `q`-quantile (linear interpolation) of
/// the held-out normal scores.
pub fn calibrate_threshold(
    mon: &ModelOfNormality,
    heldout_normal_codes: &[Vec<f64>],
    quantile: f64,
) -> Result<f64> {
    if heldout_normal_codes.is_empty() {
        return Err(Error::Contract("no held-out normals to calibrate on".into()));
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "quantile {quantile} must lie in (0, 1)"
        )));
    }
    let mut scores = heldout_normal_codes
        .iter()
        .map(|c| score(mon, c))
        .collect::<Result<Vec<_>>>()?;
    scores.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = quantile * (scores.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        Ok(scores[lo])
    } else {
        Ok(scores[lo] + (pos - lo as f64) * (scores[hi] - scores[lo]))
    }
}
