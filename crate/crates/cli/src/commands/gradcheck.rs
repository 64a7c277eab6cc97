//! `gradcheck`: verify the model's analytic gradients against central
//! finite differences on a small batch. Exit code reflects pass/fail.

use std::path::Path;

use serde::Serialize;

use maskedtl_core::embednet::{batch_gradient, mean_squared_error, FeatureEmbeddingModel};
use maskedtl_core::numcore::grad_check;
use maskedtl_core::synthdata::generate_dataset;
use maskedtl_core::Result;

use crate::config::RunConfig;

#[derive(Serialize)]
struct GradCheckOutput {
    max_rel_err: f64,
    worst_coordinate: usize,
    tolerance: f64,
    batch_size: usize,
    param_count: usize,
    pass: bool,
}

/// Returns the process exit code: 0 on pass, 2 on fail.
pub fn run(
    config: &RunConfig,
    _out_dir: &Path,
    tolerance: f64,
    batch_size: usize,
    corrupt_gradient: bool,
) -> Result<i32> {
    let model = FeatureEmbeddingModel::new(10, config.model.clone())?;
    let batch = generate_dataset(
        batch_size,
        &config.data.task,
        config.data.p_miss,
        config.eq1_interpretation,
        config.seed,
    )?;

    let (_, mut analytic) = batch_gradient(&model, &batch.samples)?;
    if corrupt_gradient {
        // Test hook: double the largest-magnitude coordinate.
        let worst = analytic
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        analytic[worst] *= 2.0;
    }

    let params = model.flat_params();
    let mut scratch = model.clone();
    let report = grad_check(
        |p| {
            scratch.set_flat_params(p).unwrap();
            mean_squared_error(&scratch, &batch.samples).unwrap()
        },
        &params,
        &analytic,
        1e-5,
        tolerance,
    )?;

    let output = GradCheckOutput {
        max_rel_err: report.max_rel_err,
        worst_coordinate: report.worst_coordinate,
        tolerance,
        batch_size,
        param_count: params.len(),
        pass: report.pass,
    };
    println!("{}", serde_json::to_string(&output)?);
    Ok(if report.pass { 0 } else { 2 })
}
