//! Feature-embedding networks for sensor data with missing values, plus the
//! transfer-learning and anomaly-detection machinery built on top of them.
//!
//! The crate is organized bottom-up:
//!
//! - [`numcore`] — a minimal dense-network engine (layers, reverse-mode
//!   gradients on an activation tape, losses, SGD/Adam, gradient checking).
//! - [`synthdata`] — a reproducible synthetic benchmark: two latent factors
//!   drive three groups of features, targets follow a trigonometric map, and
//!   features drop out with a configurable Bernoulli rate. Datasets round-trip
//!   through CSV plus a JSON sidecar.
//! - [`embednet`] — the feature-embedding regression model: a learned
//!   embedding per feature index is concatenated with the feature value, run
//!   through a shared encoder, mean-pooled over the *present* features only,
//!   and decoded by a small head. Handles any subset of observed sensors
//!   without imputation.
//! - [`transfer`] — similarity measures (Gaussian-kernel MMD², metadata
//!   cosine), a when-to-transfer gate, parameter transfer (fine-tuning with
//!   freeze policies, hard-shared trunks), instance reweighting via a
//!   density-ratio classifier, a masked denoising autoencoder, and zero-/
//!   few-shot scenario harnesses.
//! - [`anomaly`] — model-of-normality pipeline: extract pooled codes with a
//!   trained network, fit a Mahalanobis or kNN normality model on anomaly-free
//!   codes, calibrate a quantile threshold, score and evaluate.
//!
//! Everything is deterministic given the seeds in the relevant configs.

pub mod anomaly;
pub mod embednet;
mod error;
pub mod fsutil;
pub mod numcore;
pub mod synthdata;
pub mod transfer;

pub use error::{Error, Result};
