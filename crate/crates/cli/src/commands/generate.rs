//! `generate`: emit the synthetic benchmark CSV plus its sidecar.

use std::path::Path;

use maskedtl_core::synthdata::{generate_dataset, write_csv};
use maskedtl_core::Result;

use crate::config::RunConfig;

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let dataset = generate_dataset(
        config.data.n_samples,
        &config.data.task,
        config.data.p_miss,
        config.eq1_interpretation,
        config.seed,
    )?;
    let path = config.resolve(out_dir, &config.paths.data);
    write_csv(&dataset, &config.data.task, &path)?;
    println!(
        "generate: {} samples, {} features -> {}",
        dataset.len(),
        dataset.feature_count,
        path.display()
    );
    Ok(())
}
