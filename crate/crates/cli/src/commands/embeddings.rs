//! `embeddings`: export the checkpoint's embedding table with group labels
//! and its cluster metrics.

use std::path::Path;

use maskedtl_core::embednet::{
    embedding_cluster_metrics, embeddings_to_csv, export_embeddings, load_checkpoint,
};
use maskedtl_core::fsutil::{atomic_write_bytes, atomic_write_json};
use maskedtl_core::synthdata::{sidecar_path, DatasetMeta};
use maskedtl_core::{Error, Result};

use crate::config::RunConfig;

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let ckpt_path = config.resolve(out_dir, &config.paths.checkpoint);
    let model = load_checkpoint(&ckpt_path)?;

    let meta_path = sidecar_path(&config.resolve(out_dir, &config.paths.data));
    let meta: DatasetMeta = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(&meta_path)?,
    ))
    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", meta_path.display())))?;

    let rows = export_embeddings(&model, &meta.group_labels)?;
    let csv_path = config.resolve(out_dir, &config.paths.embeddings);
    atomic_write_bytes(&csv_path, embeddings_to_csv(&rows).as_bytes())?;

    let table: Vec<Vec<f64>> = rows.iter().map(|r| r.coords.clone()).collect();
    let metrics = embedding_cluster_metrics(&table, &meta.group_labels)?;
    let metrics_path = config.resolve(out_dir, &config.paths.embedding_metrics);
    atomic_write_json(&metrics_path, &metrics, true)?;

    println!(
        "embeddings: {} rows -> {}; silhouette {:.4}",
        rows.len(),
        csv_path.display(),
        metrics.silhouette
    );
    Ok(())
}
