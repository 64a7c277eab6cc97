//! Minimal differentiable-network engine.
//!
//! Dense layers, explicit forward tapes, reverse-mode gradients, MSE loss,
//! SGD/Adam, and a finite-difference gradient checker. Everything is `f64`
//! and deterministic; there is no hidden global state.

mod gradcheck;
mod layer;
mod loss;
mod mlp;
mod optim;

pub use gradcheck::{grad_check, GradCheckReport};
pub use layer::{Activation, DenseLayer};
pub use loss::mse_loss;
pub use mlp::{LayerGrads, Mlp, MlpGrads, Tape};
pub use optim::{sgd_step, AdamConfig, AdamState, OptimizerConfig, OptimizerState};
