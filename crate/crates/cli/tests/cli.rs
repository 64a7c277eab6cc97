//! End-to-end tests driving the compiled binary.

use std::path::Path;
use std::process::{Command, Output};

use maskedtl_core::embednet::{load_checkpoint, EmbedNetConfig, FeatureEmbeddingModel};

const BIN: &str = env!("CARGO_BIN_EXE_maskedtl");

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small-model config so CLI tests stay fast.
fn write_small_config(dir: &Path, epochs: usize) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "seed": 7,
        "data": { "n_samples": 80 },
        "model": {
            "encoder_hidden": [8, 8],
            "code_dim": 8,
            "head_hidden": [8],
            "epochs": epochs,
            "batch_size": 16,
            "seed": 7
        }
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn generate_writes_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["generate", "--seed", "3", "--out", dir.path().to_str().unwrap()],
        dir.path(),
    );
    assert_ok(&out);
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "id,f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,y");
    assert_eq!(lines.count(), 1000);
    assert!(dir.path().join("bench.meta.json").exists());
}

#[test]
fn generate_without_missingness_has_no_empty_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "generate",
            "--seed",
            "3",
            "--n",
            "50",
            "--p-miss",
            "0",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_ok(&out);
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert!(!csv.contains(",,"), "no empty cells expected");
    assert!(!csv.lines().skip(1).any(|l| l.ends_with(',')));
}

#[test]
fn generate_is_byte_deterministic() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = run(
            &["generate", "--seed", "11", "--n", "100", "--out", d.path().to_str().unwrap()],
            d.path(),
        );
        assert_ok(&out);
    }
    assert_eq!(
        std::fs::read(d1.path().join("bench.csv")).unwrap(),
        std::fs::read(d2.path().join("bench.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(d1.path().join("bench.meta.json")).unwrap(),
        std::fs::read(d2.path().join("bench.meta.json")).unwrap()
    );
}

#[test]
fn train_writes_checkpoint_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path(), 3);
    let out_arg = dir.path().to_str().unwrap();
    assert_ok(&run(
        &["generate", "--config", cfg.to_str().unwrap(), "--out", out_arg],
        dir.path(),
    ));
    assert_ok(&run(
        &["train", "--config", cfg.to_str().unwrap(), "--out", out_arg],
        dir.path(),
    ));
    let ckpt = std::fs::read_to_string(dir.path().join("model.json")).unwrap();
    assert!(ckpt.contains("\"format_version\":1"));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "epoch,train_loss,val_loss");
    assert_eq!(lines.count(), 3);
}

#[test]
fn zero_epoch_training_keeps_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path(), 0);
    let out_arg = dir.path().to_str().unwrap();
    assert_ok(&run(
        &["generate", "--config", cfg.to_str().unwrap(), "--out", out_arg],
        dir.path(),
    ));
    assert_ok(&run(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--epochs",
            "0",
            "--out",
            out_arg,
        ],
        dir.path(),
    ));
    let loaded = load_checkpoint(&dir.path().join("model.json")).unwrap();
    let expected = FeatureEmbeddingModel::new(
        10,
        EmbedNetConfig {
            encoder_hidden: vec![8, 8],
            code_dim: 8,
            head_hidden: vec![8],
            epochs: 0,
            batch_size: 16,
            seed: 7,
            ..EmbedNetConfig::default()
        },
    )
    .unwrap();
    assert_eq!(loaded.flat_params(), expected.flat_params());
}

#[test]
fn embeddings_exports_rows_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path(), 0);
    let out_arg = dir.path().to_str().unwrap();
    assert_ok(&run(
        &["generate", "--config", cfg.to_str().unwrap(), "--out", out_arg],
        dir.path(),
    ));
    assert_ok(&run(
        &["train", "--config", cfg.to_str().unwrap(), "--out", out_arg],
        dir.path(),
    ));
    // Untrained checkpoint is fine: metrics are computed on the init.
    assert_ok(&run(
        &["embeddings", "--config", cfg.to_str().unwrap(), "--out", out_arg],
        dir.path(),
    ));
    let csv = std::fs::read_to_string(dir.path().join("embeddings.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "feature_index,group_label,e1,e2");
    assert_eq!(lines.count(), 10);
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("embedding_metrics.json")).unwrap())
            .unwrap();
    assert!(metrics.get("silhouette").is_some());
}

fn transfer_spec(mode: &str, tau_feature: f64) -> serde_json::Value {
    serde_json::json!({
        "family": { "n_tasks": 3, "perturbation_scale": 0.1, "samples_per_task": 60 },
        "mode": mode,
        "n_target_samples": 20,
        "seeds": [1, 2],
        "thresholds": { "tau_feature": tau_feature, "tau_metadata": 0.5 },
        "model": {
            "encoder_hidden": [8, 8], "code_dim": 8, "head_hidden": [8],
            "epochs": 6, "batch_size": 16
        },
        "fine_tune": { "steps": 8 }
    })
}

#[test]
fn transfer_zero_shot_names_the_chosen_source() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, transfer_spec("zero_shot", 0.0).to_string()).unwrap();
    let out = run(
        &[
            "transfer",
            "--spec",
            spec_path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_ok(&out);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("transfer_report.json")).unwrap(),
    )
    .unwrap();
    let seeds = report["seeds"].as_array().unwrap();
    assert_eq!(seeds.len(), 2);
    for s in seeds {
        assert!(s["chosen_source"].as_str().unwrap().starts_with("task_"));
    }
}

#[test]
fn impossible_gate_skips_and_says_so() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, transfer_spec("few_shot", 2.0).to_string()).unwrap();
    let out = run(
        &[
            "transfer",
            "--spec",
            spec_path.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("skipped"), "stdout: {stdout}");
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("transfer_report.json")).unwrap(),
    )
    .unwrap();
    for s in report["seeds"].as_array().unwrap() {
        assert_eq!(s["skipped"], serde_json::json!(true));
        assert_eq!(s["gate"]["gate_decision"], serde_json::json!(false));
    }
}

#[test]
fn detect_respects_the_quantile() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path(), 3);
    let out_arg = dir.path().to_str().unwrap();
    // A larger normal set so quantiles are meaningful.
    assert_ok(&run(
        &[
            "generate",
            "--config",
            cfg.to_str().unwrap(),
            "--n",
            "400",
            "--out",
            out_arg,
        ],
        dir.path(),
    ));
    assert_ok(&run(
        &["train", "--config", cfg.to_str().unwrap(), "--out", out_arg],
        dir.path(),
    ));
    assert_ok(&run(
        &[
            "detect",
            "--config",
            cfg.to_str().unwrap(),
            "--quantile",
            "0.5",
            "--out",
            out_arg,
        ],
        dir.path(),
    ));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("detection_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["quantile"], serde_json::json!(0.5));
    // Roughly half of the truly normal eval samples sit above the median
    // threshold.
    let fpr = report["metrics"]["false_positive_rate"].as_f64().unwrap();
    assert!((0.3..=0.7).contains(&fpr), "fpr {fpr}");
    assert!(report["results"].as_array().unwrap().len() > 50);
}

#[test]
fn detect_without_checkpoint_leaves_no_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path(), 0);
    let out_arg = dir.path().to_str().unwrap();
    assert_ok(&run(
        &["generate", "--config", cfg.to_str().unwrap(), "--out", out_arg],
        dir.path(),
    ));
    let out = run(
        &["detect", "--config", cfg.to_str().unwrap(), "--out", out_arg],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("detection_report.json").exists());
}

#[test]
fn gradcheck_passes_and_the_corruption_hook_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small_config(dir.path(), 0);
    let out = run(
        &["gradcheck", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        dir.path(),
    );
    assert_ok(&out);
    let parsed: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stdout).trim()).unwrap();
    assert_eq!(parsed["pass"], serde_json::json!(true));
    assert!(parsed["max_rel_err"].as_f64().unwrap() < 1e-4);

    let bad = run(
        &[
            "gradcheck",
            "--config",
            cfg.to_str().unwrap(),
            "--corrupt-gradient",
            "--out",
            dir.path().to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn unknown_config_keys_are_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"seed": 1, "surprise": 2}"#).unwrap();
    let out = run(
        &["generate", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("surprise"), "stderr: {stderr}");
}

#[test]
fn repeated_runs_are_byte_identical_end_to_end() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let cfg = write_small_config(d.path(), 2);
        let out_arg = d.path().to_str().unwrap();
        assert_ok(&run(
            &["generate", "--config", cfg.to_str().unwrap(), "--out", out_arg],
            d.path(),
        ));
        assert_ok(&run(
            &["train", "--config", cfg.to_str().unwrap(), "--out", out_arg],
            d.path(),
        ));
        assert_ok(&run(
            &["embeddings", "--config", cfg.to_str().unwrap(), "--out", out_arg],
            d.path(),
        ));
    }
    for file in ["bench.csv", "model.json", "trace.csv", "embeddings.csv", "embedding_metrics.json"] {
        assert_eq!(
            std::fs::read(d1.path().join(file)).unwrap(),
            std::fs::read(d2.path().join(file)).unwrap(),
            "{file} must be byte-identical"
        );
    }
}
