//! `train`: fit the feature-embedding model on a dataset CSV, writing the
//! checkpoint and a per-epoch trace CSV.

use std::fmt::Write as _;
use std::path::Path;

use maskedtl_core::embednet::{save_checkpoint, train, FeatureEmbeddingModel, TrainingTrace};
use maskedtl_core::fsutil::atomic_write_bytes;
use maskedtl_core::synthdata::read_csv;
use maskedtl_core::Result;

use crate::config::RunConfig;

fn trace_csv(trace: &TrainingTrace) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for e in &trace.epochs {
        let _ = writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.val_loss);
    }
    out
}

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let data_path = config.resolve(out_dir, &config.paths.data);
    let (dataset, _task) = read_csv(&data_path)?;

    let mut model = FeatureEmbeddingModel::new(dataset.feature_count, config.model.clone())?;
    let trace = if config.model.epochs > 0 {
        train(&mut model, &dataset, &config.model)?
    } else {
        TrainingTrace::default()
    };

    let ckpt_path = config.resolve(out_dir, &config.paths.checkpoint);
    save_checkpoint(&model, &ckpt_path)?;
    let trace_path = config.resolve(out_dir, &config.paths.trace);
    atomic_write_bytes(&trace_path, trace_csv(&trace).as_bytes())?;

    match trace.final_val_loss() {
        Some(v) => println!(
            "train: {} epochs, final val mse {v} -> {}",
            trace.epochs.len(),
            ckpt_path.display()
        ),
        None => println!("train: 0 epochs, wrote initialization -> {}", ckpt_path.display()),
    }
    Ok(())
}
