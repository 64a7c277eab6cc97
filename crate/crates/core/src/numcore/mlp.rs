//! Multilayer perceptrons with reverse-mode gradients on an activation tape.

use rand::Rng;

use super::layer::{Activation, DenseLayer};
use crate::{Error, Result};

/// A stack of dense layers with chained dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Per-layer activation record from a forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `inputs[k]` is the vector fed into layer `k`; `inputs[0]` is the
    /// network input.
    inputs: Vec<Vec<f64>>,
    /// `pre_acts[k] = W_k * inputs[k] + b_k`.
    pre_acts: Vec<Vec<f64>>,
}

impl Tape {
    /// Recorded pre-activations, one vector per layer.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre_acts
    }
}

/// Parameter-shaped gradients for one `Mlp`.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone)]
pub struct LayerGrads {
    /// Row-major, same shape as the layer's weights.
    pub d_weights: Vec<f64>,
    pub d_biases: Vec<f64>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrads {
                    d_weights: vec![0.0; l.weights().len()],
                    d_biases: vec![0.0; l.biases().len()],
                })
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for lg in &mut self.layers {
            lg.d_weights.iter_mut().for_each(|v| *v = 0.0);
            lg.d_biases.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for lg in &mut self.layers {
            lg.d_weights.iter_mut().for_each(|v| *v *= s);
            lg.d_biases.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        for lg in &self.layers {
            out.extend_from_slice(&lg.d_weights);
            out.extend_from_slice(&lg.d_biases);
        }
    }
}

impl Mlp {
    /// Wraps explicit layers, checking that dimensions chain.
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("mlp needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "layer output {} does not chain into next input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Seeded construction: hidden layers use `hidden_act`, the output layer
    /// uses `out_act`.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        hidden: &[usize],
        out_dim: usize,
        hidden_act: Activation,
        out_act: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = in_dim;
        for &width in hidden {
            layers.push(DenseLayer::init(prev, width, hidden_act, rng)?);
            prev = width;
        }
        layers.push(DenseLayer::init(prev, out_dim, out_act, rng)?);
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Forward pass; returns the output and the tape needed for `backward`.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input length {} != network input dim {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_acts = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let z = layer.pre_activation(&cur);
            let a = layer.activate(&z);
            inputs.push(cur);
            pre_acts.push(z);
            cur = a;
        }
        Ok((cur, Tape { inputs, pre_acts }))
    }

    /// Output without a tape, for inference.
    pub fn infer(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// Reverse pass from `d_out = dL/dy`. Returns fresh parameter gradients
    /// and `dL/dx`.
    pub fn backward(&self, tape: &Tape, d_out: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        let mut grads = MlpGrads::zeros_like(self);
        let d_input = self.backward_acc(tape, d_out, &mut grads)?;
        Ok((grads, d_input))
    }

    /// Reverse pass that accumulates into `grads` (summing across calls),
    /// for mini-batch reductions. Returns `dL/dx`.
    pub fn backward_acc(
        &self,
        tape: &Tape,
        d_out: &[f64],
        grads: &mut MlpGrads,
    ) -> Result<Vec<f64>> {
        self.check_tape(tape)?;
        if d_out.len() != self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient length {} != output dim {}",
                d_out.len(),
                self.output_dim()
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Contract("gradient buffer shape mismatch".into()));
        }

        // delta = dL/dz for the current layer, walking backwards.
        let mut delta: Vec<f64> = d_out
            .iter()
            .zip(tape.pre_acts[self.layers.len() - 1].iter())
            .map(|(&g, &z)| g * self.layers[self.layers.len() - 1].activation().derivative(z))
            .collect();

        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &tape.inputs[k];
            let lg = &mut grads.layers[k];
            let in_dim = layer.in_dim();

            for (r, &d) in delta.iter().enumerate() {
                lg.d_biases[r] += d;
                let row = &mut lg.d_weights[r * in_dim..(r + 1) * in_dim];
                for (w, &xi) in row.iter_mut().zip(input.iter()) {
                    *w += d * xi;
                }
            }

            // dL/dinput = W^T delta
            let mut d_input = vec![0.0; in_dim];
            for (r, &d) in delta.iter().enumerate() {
                let row = &layer.weights()[r * in_dim..(r + 1) * in_dim];
                for (di, &w) in d_input.iter_mut().zip(row.iter()) {
                    *di += w * d;
                }
            }

            if k == 0 {
                return Ok(d_input);
            }
            let prev = &self.layers[k - 1];
            delta = d_input
                .iter()
                .zip(tape.pre_acts[k - 1].iter())
                .map(|(&g, &z)| g * prev.activation().derivative(z))
                .collect();
        }
        unreachable!("mlp has at least one layer");
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        let ok = tape.inputs.len() == self.layers.len()
            && tape.pre_acts.len() == self.layers.len()
            && self.layers.iter().enumerate().all(|(k, l)| {
                tape.inputs[k].len() == l.in_dim() && tape.pre_acts[k].len() == l.out_dim()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(
                "tape does not match this network (stale or from another model)".into(),
            ))
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Appends all parameters (per layer: weights row-major, then biases).
    pub fn flatten_params_into(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            l.flatten_params_into(out);
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.flatten_params_into(&mut out);
        out
    }

    /// Overwrites parameters from a flat slice laid out as in
    /// [`Mlp::flatten_params_into`].
    pub fn assign_params(&mut self, src: &[f64]) -> Result<()> {
        if src.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "flat parameter length {} != parameter count {}",
                src.len(),
                self.param_count()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let n = l.param_count();
            l.assign_params(&src[off..off + n]);
            off += n;
        }
        Ok(())
    }
}
