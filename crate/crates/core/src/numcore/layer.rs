//! Dense layers: affine transform plus element-wise activation.

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Element-wise activation applied after the affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative with respect to the pre-activation. The relu subgradient at
    /// zero is taken as 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// A dense layer `y = activation(W x + b)`.
///
/// Weights are stored row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
    in_dim: usize,
    out_dim: usize,
}

impl DenseLayer {
    /// Builds a layer from explicit weight rows and biases.
    pub fn from_parts(
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.is_empty() || weights[0].is_empty() {
            return Err(Error::ShapeMismatch("layer dims must be > 0".into()));
        }
        let out_dim = weights.len();
        let in_dim = weights[0].len();
        if weights.iter().any(|row| row.len() != in_dim) {
            return Err(Error::ShapeMismatch("ragged weight rows".into()));
        }
        if biases.len() != out_dim {
            return Err(Error::ShapeMismatch(format!(
                "bias length {} != weight rows {}",
                biases.len(),
                out_dim
            )));
        }
        let flat: Vec<f64> = weights.into_iter().flatten().collect();
        if flat.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite layer parameter".into()));
        }
        Ok(Self {
            weights: flat,
            biases,
            activation,
            in_dim,
            out_dim,
        })
    }

    /// Seeded initialization: He-uniform for relu layers, Xavier-uniform for
    /// tanh/identity. Biases start at zero.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::ShapeMismatch("layer dims must be > 0".into()));
        }
        let limit = match activation {
            Activation::Relu => (6.0 / in_dim as f64).sqrt(),
            Activation::Identity | Activation::Tanh => {
                (6.0 / (in_dim as f64 + out_dim as f64)).sqrt()
            }
        };
        let dist = Uniform::new(-limit, limit)
            .map_err(|e| Error::InvalidConfig(format!("init range: {e}")))?;
        let weights = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Ok(Self {
            weights,
            biases: vec![0.0; out_dim],
            activation,
            in_dim,
            out_dim,
        })
    }

    /// All-zero parameters; useful for tests and as an optimization target.
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::ShapeMismatch("layer dims must be > 0".into()));
        }
        Ok(Self {
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            activation,
            in_dim,
            out_dim,
        })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Flat row-major weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Weight rows as owned vectors (checkpoint serialization).
    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights
            .chunks(self.in_dim)
            .map(|r| r.to_vec())
            .collect()
    }

    /// `z = W x + b`, without the activation.
    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut z = self.biases.clone();
        for (row, zi) in self.weights.chunks(self.in_dim).zip(z.iter_mut()) {
            let mut acc = 0.0;
            for (w, xi) in row.iter().zip(x.iter()) {
                acc += w * xi;
            }
            *zi += acc;
        }
        z
    }

    pub fn activate(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|&v| self.activation.apply(v)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub(crate) fn flatten_params_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.biases);
    }

    pub(crate) fn assign_params(&mut self, src: &[f64]) {
        debug_assert_eq!(src.len(), self.param_count());
        let nw = self.weights.len();
        self.weights.copy_from_slice(&src[..nw]);
        self.biases.copy_from_slice(&src[nw..]);
    }
}
