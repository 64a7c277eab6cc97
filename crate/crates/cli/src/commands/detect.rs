//! `detect`: the full anomaly pipeline on one dataset.
//!
//! The input CSV is treated as anomaly-free. It is shuffle-split into a fit
//! part (Model of Normality), a calibration part (threshold quantile), and
//! an evaluation part into which synthetic anomalies are injected. The
//! report carries per-sample scores and the detection metrics.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use maskedtl_core::anomaly::{
    calibrate_threshold, detect, evaluate, fit_mon, inject_anomalies, CodeExtractor, MonMode,
};
use maskedtl_core::embednet::load_checkpoint;
use maskedtl_core::fsutil::atomic_write_json;
use maskedtl_core::synthdata::read_csv;
use maskedtl_core::{Error, Result};

use crate::config::RunConfig;

const DETECT_SPLIT_STREAM: u64 = 0xDE;
const INJECT_SEED_SALT: u64 = 0x1AB5_EED;

#[derive(Serialize)]
struct ResultRow {
    /// Index of the sample in the input CSV.
    id: usize,
    score: f64,
    is_anomaly: bool,
}

#[derive(Serialize)]
struct Metrics {
    auc: f64,
    precision: f64,
    recall: f64,
    f1: f64,
    /// Flag rate among the evaluation samples that are truly normal.
    false_positive_rate: f64,
}

#[derive(Serialize)]
struct DetectionReport {
    mode: MonMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    threshold: f64,
    quantile: f64,
    injection_fraction: f64,
    shift_sd_multiples: f64,
    results: Vec<ResultRow>,
    metrics: Metrics,
}

pub fn run(config: &RunConfig, out_dir: &Path) -> Result<()> {
    let cfg = &config.detect;
    if !(cfg.fit_fraction > 0.0
        && cfg.calibrate_fraction > 0.0
        && cfg.fit_fraction + cfg.calibrate_fraction < 1.0)
    {
        return Err(Error::InvalidConfig(
            "fit_fraction and calibrate_fraction must be positive and sum below 1".into(),
        ));
    }

    let model = load_checkpoint(&config.resolve(out_dir, &config.paths.checkpoint))?;
    let (normals, _task) = read_csv(&config.resolve(out_dir, &config.paths.data))?;
    let n = normals.len();
    if n < 10 {
        return Err(Error::Contract(format!(
            "detection pipeline needs a reasonable normal set, got {n} samples"
        )));
    }

    // Deterministic three-way split.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(DETECT_SPLIT_STREAM);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let n_fit = ((cfg.fit_fraction * n as f64).floor() as usize).max(2);
    let n_cal = ((cfg.calibrate_fraction * n as f64).floor() as usize).max(1);
    let (fit_idx, rest) = indices.split_at(n_fit);
    let (cal_idx, eval_idx) = rest.split_at(n_cal.min(rest.len().saturating_sub(1)));
    if eval_idx.is_empty() {
        return Err(Error::Contract("no samples left for evaluation".into()));
    }

    let extractor = CodeExtractor {
        model: &model,
        append_missing_fraction: cfg.append_missing_fraction,
    };
    let fit_samples = normals.select(fit_idx);
    let cal_samples = normals.select(cal_idx);
    let eval_samples = normals.select(eval_idx);

    let mon = fit_mon(&extractor.extract_all(&fit_samples.samples)?, &cfg.mon)?;
    let tau = calibrate_threshold(
        &mon,
        &extractor.extract_all(&cal_samples.samples)?,
        cfg.quantile,
    )?;

    let (eval_injected, labels) = inject_anomalies(
        &eval_samples,
        cfg.injection_fraction,
        cfg.shift_sd_multiples,
        config.seed ^ INJECT_SEED_SALT,
    )?;
    let decisions = detect(&mon, tau, &eval_injected.samples, &extractor)?;
    let scores: Vec<f64> = decisions.iter().map(|d| d.score).collect();
    let eval_metrics = evaluate(&scores, &labels, tau)?;

    let n_neg = labels.iter().filter(|&&l| !l).count();
    let false_pos = decisions
        .iter()
        .zip(&labels)
        .filter(|(d, &l)| d.is_anomaly && !l)
        .count();
    let report = DetectionReport {
        mode: cfg.mon.mode,
        lambda: matches!(cfg.mon.mode, MonMode::Mahalanobis).then_some(cfg.mon.lambda),
        k: matches!(cfg.mon.mode, MonMode::Knn).then_some(cfg.mon.k),
        threshold: tau,
        quantile: cfg.quantile,
        injection_fraction: cfg.injection_fraction,
        shift_sd_multiples: cfg.shift_sd_multiples,
        results: eval_idx
            .iter()
            .zip(&decisions)
            .map(|(&id, d)| ResultRow {
                id,
                score: d.score,
                is_anomaly: d.is_anomaly,
            })
            .collect(),
        metrics: Metrics {
            auc: eval_metrics.auc,
            precision: eval_metrics.precision,
            recall: eval_metrics.recall,
            f1: eval_metrics.f1,
            false_positive_rate: false_pos as f64 / n_neg as f64,
        },
    };

    let report_path = config.resolve(out_dir, &config.paths.detection_report);
    atomic_write_json(&report_path, &report, true)?;
    println!(
        "detect: auc {:.4}, fpr {:.4}, threshold {:.4} -> {}",
        report.metrics.auc,
        report.metrics.false_positive_rate,
        tau,
        report_path.display()
    );
    Ok(())
}
