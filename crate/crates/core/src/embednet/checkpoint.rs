//! Checkpoint format: one JSON document, `format_version` 1.
//!
//! ```json
//! {"format_version":1,"config":{...},"embedding_table":[[...]],
//!  "encoder":[{"w":[[...]],"b":[...],"act":"relu"},...],"head":[...]}
//! ```
//!
//! Floats serialize with full round-trip precision, so save-then-load is the
//! identity on parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{EmbedNetConfig, FeatureEmbeddingModel};
use crate::fsutil::atomic_write_bytes;
use crate::numcore::{Activation, DenseLayer, Mlp};
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerDto {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
    act: Activation,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDto {
    format_version: u32,
    config: EmbedNetConfig,
    embedding_table: Vec<Vec<f64>>,
    encoder: Vec<LayerDto>,
    head: Vec<LayerDto>,
}

fn mlp_to_dtos(mlp: &Mlp) -> Vec<LayerDto> {
    mlp.layers()
        .iter()
        .map(|l| LayerDto {
            w: l.weight_rows(),
            b: l.biases().to_vec(),
            act: l.activation(),
        })
        .collect()
}

fn mlp_from_dtos(dtos: Vec<LayerDto>) -> Result<Mlp> {
    let layers = dtos
        .into_iter()
        .map(|d| DenseLayer::from_parts(d.w, d.b, d.act))
        .collect::<Result<Vec<_>>>()?;
    Mlp::new(layers)
}

/// Serializes a model to the checkpoint JSON text.
pub fn checkpoint_to_json(model: &FeatureEmbeddingModel) -> Result<String> {
    let dto = CheckpointDto {
        format_version: CHECKPOINT_FORMAT_VERSION,
        config: model.config().clone(),
        embedding_table: model.embedding_table().to_vec(),
        encoder: mlp_to_dtos(model.encoder()),
        head: mlp_to_dtos(model.head()),
    };
    Ok(serde_json::to_string(&dto)?)
}

/// Parses checkpoint JSON text, re-validating every model invariant.
pub fn checkpoint_from_json(text: &str) -> Result<FeatureEmbeddingModel> {
    let dto: CheckpointDto = serde_json::from_str(text)?;
    if dto.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported checkpoint format_version {}, expected {}",
            dto.format_version, CHECKPOINT_FORMAT_VERSION
        )));
    }
    let encoder = mlp_from_dtos(dto.encoder)?;
    let head = mlp_from_dtos(dto.head)?;
    FeatureEmbeddingModel::from_parts(dto.embedding_table, encoder, head, dto.config)
}

/// Writes the checkpoint atomically.
pub fn save_checkpoint(model: &FeatureEmbeddingModel, path: &Path) -> Result<()> {
    let mut text = checkpoint_to_json(model)?;
    text.push('\n');
    atomic_write_bytes(path, text.as_bytes())
}

/// Loads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<FeatureEmbeddingModel> {
    let text = std::fs::read_to_string(path)?;
    checkpoint_from_json(&text)
}
