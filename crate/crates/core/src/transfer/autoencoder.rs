//! Feature-representation transfer: a masked denoising autoencoder.
//!
//! Missing inputs are zero-filled and the presence mask is appended as K
//! extra binary inputs, so the encoder sees `2K` values. The reconstruction
//! loss runs over observed entries only; nothing is ever imputed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numcore::{Activation, Mlp, MlpGrads, OptimizerConfig};
use crate::synthdata::{Dataset, MaskedSample};
use crate::{Error, Result};

const AE_SHUFFLE_STREAM: u64 = 0xAE;

/// Architecture and training settings for [`autoencoder_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    pub bottleneck: usize,
    /// Hidden widths, mirrored between encoder and decoder.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            bottleneck: 2,
            hidden: vec![32],
            activation: Activation::Tanh,
            optimizer: OptimizerConfig::Adam(crate::numcore::AdamConfig {
                lr: 3e-3,
                ..crate::numcore::AdamConfig::default()
            }),
            epochs: 300,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Encoder (`2K -> bottleneck`) and decoder (`bottleneck -> K`).
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    encoder: Mlp,
    decoder: Mlp,
    feature_count: usize,
}

impl Autoencoder {
    pub fn from_parts(encoder: Mlp, decoder: Mlp) -> Result<Self> {
        let feature_count = decoder.output_dim();
        if encoder.input_dim() != 2 * feature_count {
            return Err(Error::ShapeMismatch(format!(
                "encoder input {} != 2 * feature count {}",
                encoder.input_dim(),
                2 * feature_count
            )));
        }
        if encoder.output_dim() != decoder.input_dim() {
            return Err(Error::ShapeMismatch("bottleneck dims do not chain".into()));
        }
        if encoder.output_dim() >= feature_count {
            return Err(Error::InvalidConfig(format!(
                "bottleneck {} must be smaller than feature count {}",
                encoder.output_dim(),
                feature_count
            )));
        }
        Ok(Self {
            encoder,
            decoder,
            feature_count,
        })
    }

    pub fn bottleneck(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    /// `[values zero-filled, mask as 0/1]`.
    fn input_vector(&self, sample: &MaskedSample) -> Result<Vec<f64>> {
        if sample.feature_count() != self.feature_count {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} features, autoencoder expects {}",
                sample.feature_count(),
                self.feature_count
            )));
        }
        let mut input = vec![0.0; 2 * self.feature_count];
        for (i, v) in sample.observed() {
            input[i] = v;
            input[self.feature_count + i] = 1.0;
        }
        Ok(input)
    }
}

/// Bottleneck activations for a sample.
pub fn autoencoder_encode(ae: &Autoencoder, sample: &MaskedSample) -> Result<Vec<f64>> {
    ae.encoder.infer(&ae.input_vector(sample)?)
}

/// Full reconstruction of all K features, including the unobserved ones.
pub fn autoencoder_reconstruct(ae: &Autoencoder, sample: &MaskedSample) -> Result<Vec<f64>> {
    let code = autoencoder_encode(ae, sample)?;
    ae.decoder.infer(&code)
}

/// Mean over samples of the per-sample reconstruction MSE, measured on
/// observed entries only.
pub fn masked_reconstruction_mse(ae: &Autoencoder, samples: &[MaskedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract("reconstruction mse over empty set".into()));
    }
    let mut total = 0.0;
    for s in samples {
        let recon = autoencoder_reconstruct(ae, s)?;
        let mut sum = 0.0;
        let mut n_obs = 0usize;
        for (i, v) in s.observed() {
            let d = recon[i] - v;
            sum += d * d;
            n_obs += 1;
        }
        total += sum / n_obs as f64;
    }
    Ok(total / samples.len() as f64)
}

/// Trains an autoencoder on `data` by masked reconstruction MSE.
pub fn autoencoder_fit(data: &Dataset, config: &AutoencoderConfig) -> Result<Autoencoder> {
    config.optimizer.validate()?;
    if data.is_empty() {
        return Err(Error::Contract("autoencoder_fit on empty dataset".into()));
    }
    if config.batch_size == 0 || config.hidden.iter().any(|&w| w == 0) {
        return Err(Error::InvalidConfig("bad autoencoder dims".into()));
    }
    let k = data.feature_count;
    if config.bottleneck == 0 || config.bottleneck >= k {
        return Err(Error::InvalidConfig(format!(
            "bottleneck {} must lie in [1, {})",
            config.bottleneck, k
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let encoder = Mlp::init(
        2 * k,
        &config.hidden,
        config.bottleneck,
        config.activation,
        Activation::Identity,
        &mut rng,
    )?;
    let decoder_hidden: Vec<usize> = config.hidden.iter().rev().copied().collect();
    let decoder = Mlp::init(
        config.bottleneck,
        &decoder_hidden,
        k,
        config.activation,
        Activation::Identity,
        &mut rng,
    )?;
    let mut ae = Autoencoder::from_parts(encoder, decoder)?;

    let enc_len = ae.encoder.param_count();
    let mut params = Vec::with_capacity(enc_len + ae.decoder.param_count());
    ae.encoder.flatten_params_into(&mut params);
    ae.decoder.flatten_params_into(&mut params);
    let mut opt = config.optimizer.init(params.len())?;
    let mut enc_grads = MlpGrads::zeros_like(&ae.encoder);
    let mut dec_grads = MlpGrads::zeros_like(&ae.decoder);
    let mut flat_grads: Vec<f64> = Vec::with_capacity(params.len());

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(AE_SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(config.batch_size) {
            let bsz = batch.len() as f64;
            enc_grads.zero();
            dec_grads.zero();
            let mut batch_loss = 0.0;
            for &idx in batch {
                let sample = &data.samples[idx];
                let input = ae.input_vector(sample)?;
                let (code, enc_tape) = ae.encoder.forward(&input)?;
                let (recon, dec_tape) = ae.decoder.forward(&code)?;
                let n_obs = sample.present_count() as f64;
                let mut d_recon = vec![0.0; k];
                for (i, v) in sample.observed() {
                    let d = recon[i] - v;
                    batch_loss += d * d / n_obs;
                    d_recon[i] = 2.0 * d / (n_obs * bsz);
                }
                let d_code = ae.decoder.backward_acc(&dec_tape, &d_recon, &mut dec_grads)?;
                ae.encoder.backward_acc(&enc_tape, &d_code, &mut enc_grads)?;
            }
            batch_loss /= bsz;
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite reconstruction loss at epoch {epoch}"
                )));
            }
            flat_grads.clear();
            enc_grads.flatten_into(&mut flat_grads);
            dec_grads.flatten_into(&mut flat_grads);
            opt.step(&mut params, &flat_grads)?;
            ae.encoder.assign_params(&params[..enc_len])?;
            ae.decoder.assign_params(&params[enc_len..])?;
        }
    }
    Ok(ae)
}
