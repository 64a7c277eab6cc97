//! `transfer`: run a zero-/few-shot experiment described by a JSON spec.

use std::path::Path;

use maskedtl_core::fsutil::atomic_write_json;
use maskedtl_core::transfer::{run_experiment, ExperimentSpec};
use maskedtl_core::{Error, Result};

use crate::config::RunConfig;

pub fn run(config: &RunConfig, out_dir: &Path, spec_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)?;
    let spec: ExperimentSpec = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", spec_path.display())))?;

    let report = run_experiment(&spec)?;
    let report_path = config.resolve(out_dir, &config.paths.transfer_report);
    atomic_write_json(&report_path, &report, true)?;

    for seed in &report.seeds {
        let status = if seed.skipped { "skipped (gate closed)" } else { "transferred" };
        println!(
            "transfer: seed {} chose {} -> {status}",
            seed.seed, seed.chosen_source
        );
    }
    if let Some(ratio) = report.aggregate.median_improvement_ratio {
        println!("transfer: median improvement ratio {ratio:.4}");
    }
    if let Some(mse) = report.aggregate.median_zero_shot_mse {
        println!("transfer: median zero-shot mse {mse:.4}");
    }
    println!("transfer: report -> {}", report_path.display());
    Ok(())
}
