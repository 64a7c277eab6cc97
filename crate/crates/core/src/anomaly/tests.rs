use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::embednet::EmbedNetConfig;
use crate::synthdata::{generate_dataset, Eq1Interpretation, TaskSpec};

fn gaussian_codes(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn tiny_model(seed: u64) -> FeatureEmbeddingModel {
    FeatureEmbeddingModel::new(
        10,
        EmbedNetConfig {
            encoder_hidden: vec![8],
            code_dim: 6,
            head_hidden: vec![8],
            seed,
            ..EmbedNetConfig::default()
        },
    )
    .unwrap()
}

#[test]
fn extraction_is_the_pooled_prehead_code() {
    let model = tiny_model(1);
    let data = generate_dataset(20, &TaskSpec::reference(), 0.2, Eq1Interpretation::Symmetric, 2)
        .unwrap();
    for s in &data.samples {
        let a = extract_features(&model, s).unwrap();
        let b = model.pooled_code(s).unwrap();
        assert_eq!(a, b);
        let again = extract_features(&model, s).unwrap();
        assert_eq!(a, again);
    }
}

#[test]
fn zero_model_extracts_zero_codes() {
    use crate::numcore::{Activation, DenseLayer, Mlp};
    let embedding = vec![vec![0.0; 2]; 4];
    let encoder = Mlp::new(vec![DenseLayer::zeros(3, 5, Activation::Identity).unwrap()]).unwrap();
    let head = Mlp::new(vec![DenseLayer::zeros(5, 1, Activation::Identity).unwrap()]).unwrap();
    let config = EmbedNetConfig {
        embedding_dim: 2,
        encoder_hidden: vec![],
        code_dim: 5,
        head_hidden: vec![],
        ..EmbedNetConfig::default()
    };
    let model = FeatureEmbeddingModel::from_parts(embedding, encoder, head, config).unwrap();
    let sample = crate::synthdata::MaskedSample::new(
        vec![1.0, -2.0, 0.5, 3.0],
        vec![true, true, false, true],
        0.0,
    )
    .unwrap();
    let code = extract_features(&model, &sample).unwrap();
    assert!(code.iter().all(|&c| c == 0.0));
}

#[test]
fn missing_fraction_append_is_config_gated() {
    let model = tiny_model(3);
    let sample = crate::synthdata::MaskedSample::new(
        (0..10).map(|i| i as f64 / 10.0).collect(),
        vec![true, true, false, false, true, true, true, true, true, true],
        0.0,
    )
    .unwrap();
    let off = CodeExtractor { model: &model, append_missing_fraction: false };
    let on = CodeExtractor { model: &model, append_missing_fraction: true };
    let plain = off.extract(&sample).unwrap();
    let extended = on.extract(&sample).unwrap();
    assert_eq!(extended.len(), plain.len() + 1);
    assert_eq!(&extended[..plain.len()], plain.as_slice());
    assert!((extended[plain.len()] - 0.2).abs() < 1e-15);
}

#[test]
fn identical_codes_give_mean_and_ridge_only() {
    let c = vec![1.5, -0.5, 2.0];
    let codes = vec![c.clone(); 6];
    let mon = fit_mon(&codes, &MonConfig { lambda: 1e-3, ..MonConfig::default() }).unwrap();
    match &mon {
        ModelOfNormality::Mahalanobis { mean, covariance, .. } => {
            assert_eq!(mean, &c);
            for i in 0..3 {
                for j in 0..3 {
                    let expected = if i == j { 1e-3 } else { 0.0 };
                    assert!((covariance[i][j] - expected).abs() < 1e-15);
                }
            }
        }
        _ => panic!("expected mahalanobis"),
    }
    assert_eq!(score(&mon, &c).unwrap(), 0.0);
}

#[test]
fn two_point_covariance_by_hand() {
    let codes = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
    let mon = fit_mon(&codes, &MonConfig { lambda: 1e-6, ..MonConfig::default() }).unwrap();
    match &mon {
        ModelOfNormality::Mahalanobis { mean, covariance, .. } => {
            assert_eq!(mean, &vec![1.0, 0.0]);
            // Sample covariance with n-1: var(x) = 2, everything else 0.
            assert!((covariance[0][0] - (2.0 + 1e-6)).abs() < 1e-12);
            assert!((covariance[1][1] - 1e-6).abs() < 1e-18);
            assert_eq!(covariance[0][1], 0.0);
        }
        _ => panic!("expected mahalanobis"),
    }
}

#[test]
fn knn_mode_stores_the_gallery() {
    let codes = gaussian_codes(10, 3, 4);
    let mon = fit_mon(&codes, &MonConfig { mode: MonMode::Knn, k: 3, ..MonConfig::default() })
        .unwrap();
    match &mon {
        ModelOfNormality::Knn { gallery, k } => {
            assert_eq!(gallery, &codes);
            assert_eq!(*k, 3);
        }
        _ => panic!("expected knn"),
    }
    // A gallery member with k=1 scores zero.
    let mon1 = fit_mon(&codes, &MonConfig { mode: MonMode::Knn, k: 1, ..MonConfig::default() })
        .unwrap();
    assert_eq!(score(&mon1, &codes[4]).unwrap(), 0.0);
}

#[test]
fn fit_requires_enough_codes() {
    let one = vec![vec![1.0, 2.0]];
    assert!(fit_mon(&one, &MonConfig::default()).is_err());
    let three = gaussian_codes(3, 2, 5);
    assert!(fit_mon(&three, &MonConfig { mode: MonMode::Knn, k: 4, ..MonConfig::default() }).is_err());
    assert!(fit_mon(&[], &MonConfig::default()).is_err());
}

#[test]
fn identity_covariance_reduces_to_euclidean() {
    let mean = vec![1.0, 2.0, 3.0];
    // Raw covariance (1 - lambda) I so that the regularized matrix is I.
    let lambda = 1e-4;
    let mut cov = vec![vec![0.0; 3]; 3];
    for i in 0..3 {
        cov[i][i] = 1.0 - lambda;
    }
    let mon = ModelOfNormality::mahalanobis_from_moments(mean.clone(), cov, lambda).unwrap();
    let code = vec![1.0 + 3.0, 2.0, 3.0 + 4.0]; // distance 5 from the mean
    let s = score(&mon, &code).unwrap();
    assert!((s - 5.0).abs() < 1e-12, "score {s}");
}

#[test]
fn mahalanobis_is_rotation_invariant() {
    // Random orthogonal matrix via Gram-Schmidt.
    let d = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for u in &q {
            let proj: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u.iter()) {
                *vi -= proj * ui;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            q.push(v);
        }
    }
    let rotate = |x: &[f64]| -> Vec<f64> {
        q.iter().map(|row| row.iter().zip(x.iter()).map(|(a, b)| a * b).sum()).collect()
    };

    let codes = gaussian_codes(80, d, 7);
    let rotated: Vec<Vec<f64>> = codes.iter().map(|c| rotate(c)).collect();
    let cfg = MonConfig::default();
    let mon = fit_mon(&codes, &cfg).unwrap();
    let mon_rot = fit_mon(&rotated, &cfg).unwrap();
    for probe in gaussian_codes(20, d, 8) {
        let s = score(&mon, &probe).unwrap();
        let s_rot = score(&mon_rot, &rotate(&probe)).unwrap();
        assert!((s - s_rot).abs() < 1e-8, "{s} vs {s_rot}");
    }
}

#[test]
fn score_grows_along_rays_from_the_mean() {
    let codes = gaussian_codes(60, 3, 9);
    let mon = fit_mon(&codes, &MonConfig::default()).unwrap();
    let mean = match &mon {
        ModelOfNormality::Mahalanobis { mean, .. } => mean.clone(),
        _ => unreachable!(),
    };
    let direction = [0.3, -1.0, 0.7];
    let mut last = -1.0;
    for step in 0..10 {
        let t = step as f64 * 0.5;
        let code: Vec<f64> = mean.iter().zip(direction.iter()).map(|(m, d)| m + t * d).collect();
        let s = score(&mon, &code).unwrap();
        assert!(s > last, "score must increase along the ray");
        last = s;
    }
}

#[test]
fn quantile_interpolation_matches_the_oracle() {
    let codes = gaussian_codes(50, 2, 10);
    let mon = fit_mon(&codes, &MonConfig::default()).unwrap();

    // All-equal held-out scores collapse to that score.
    let same = vec![codes[0].clone(); 5];
    let tau_same = calibrate_threshold(&mon, &same, 0.7).unwrap();
    assert_eq!(tau_same, score(&mon, &codes[0]).unwrap());

    // Interpolated median of scores 1..=100 constructed directly.
    let mean = vec![0.0];
    let cov = vec![vec![1.0 - 1e-4]];
    let unit = ModelOfNormality::mahalanobis_from_moments(mean, cov, 1e-4).unwrap();
    let heldout: Vec<Vec<f64>> = (1..=100).map(|i| vec![i as f64]).collect();
    let tau = calibrate_threshold(&unit, &heldout, 0.5).unwrap();
    assert!((tau - 50.5).abs() < 1e-12, "tau = {tau}");

    assert!(calibrate_threshold(&mon, &[], 0.5).is_err());
    assert!(calibrate_threshold(&mon, &same, 1.0).is_err());
}

#[test]
fn fresh_normal_false_positive_rate_tracks_the_quantile() {
    let fit = gaussian_codes(2000, 4, 11);
    let cal = gaussian_codes(2000, 4, 12);
    let fresh = gaussian_codes(2000, 4, 13);
    let mon = fit_mon(&fit, &MonConfig::default()).unwrap();
    let tau = calibrate_threshold(&mon, &cal, 0.99).unwrap();
    let fp = fresh
        .iter()
        .filter(|c| score(&mon, c).unwrap() > tau)
        .count();
    let rate = fp as f64 / fresh.len() as f64;
    assert!((rate - 0.01).abs() <= 0.01, "false-positive rate {rate}");
}

#[test]
fn decisions_respect_the_threshold_boundary() {
    let model = tiny_model(14);
    let data = generate_dataset(30, &TaskSpec::reference(), 0.2, Eq1Interpretation::Symmetric, 15)
        .unwrap();
    let extractor = CodeExtractor { model: &model, append_missing_fraction: false };
    let codes = extractor.extract_all(&data.samples).unwrap();
    let mon = fit_mon(&codes, &MonConfig::default()).unwrap();

    // tau = -1 flags everything (scores are >= 0).
    let all = detect(&mon, -1.0, &data.samples, &extractor).unwrap();
    assert!(all.iter().all(|d| d.is_anomaly && d.score >= 0.0));
    // Decisions always satisfy their own invariant.
    let tau = calibrate_threshold(&mon, &codes, 0.9).unwrap();
    for d in detect(&mon, tau, &data.samples, &extractor).unwrap() {
        assert_eq!(d.is_anomaly, d.score > d.threshold);
    }

    // The mean itself is never an anomaly for positive thresholds.
    let mean = match &mon {
        ModelOfNormality::Mahalanobis { mean, .. } => mean.clone(),
        _ => unreachable!(),
    };
    assert!(score(&mon, &mean).unwrap() == 0.0);
}

#[test]
fn evaluation_scores_the_usual_suspects() {
    // Perfect separation.
    let m = evaluate(&[0.1, 0.2, 0.9, 1.0], &[false, false, true, true], 0.5).unwrap();
    assert_eq!(m.auc, 1.0);
    assert_eq!(m.precision, 1.0);
    assert_eq!(m.recall, 1.0);
    assert_eq!(m.f1, 1.0);

    // Ties get midranks.
    let m = evaluate(&[1.0, 1.0], &[true, false], 2.0).unwrap();
    assert_eq!(m.auc, 0.5);

    // All predicted positive: recall 1, precision = prevalence.
    let m = evaluate(&[1.0, 2.0, 3.0, 4.0], &[false, true, false, false], 0.0).unwrap();
    assert_eq!(m.recall, 1.0);
    assert_eq!(m.precision, 0.25);

    // Single-class truth is a contract error.
    assert!(evaluate(&[1.0, 2.0], &[true, true], 0.5).is_err());
}

#[test]
fn random_scores_have_auc_near_half() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let scores: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let labels: Vec<bool> = (0..1000).map(|_| rng.random_bool(0.5)).collect();
    let m = evaluate(&scores, &labels, 0.5).unwrap();
    assert!((m.auc - 0.5).abs() < 0.05, "auc {}", m.auc);
}

#[test]
fn injection_counts_follow_the_binomial() {
    let data = generate_dataset(1000, &TaskSpec::reference(), 0.2, Eq1Interpretation::Symmetric, 17)
        .unwrap();
    let (injected, labels) = inject_anomalies(&data, 0.05, 3.0, 18).unwrap();
    let count = labels.iter().filter(|&&l| l).count();
    // Binomial(1000, 0.05): mean 50, sd ~6.9.
    assert!((count as i64 - 50).abs() < 25, "injected {count}");
    assert_eq!(injected.len(), data.len());

    // Only observed group-1 features move.
    for ((orig, new), &label) in data.samples.iter().zip(&injected.samples).zip(&labels) {
        assert_eq!(orig.mask(), new.mask());
        assert_eq!(orig.target(), new.target());
        for (i, v) in orig.observed() {
            let moved = new.values()[i] != v;
            if data.group_labels[i] == 1 && label {
                assert!(moved, "observed group-1 feature {i} should shift");
            } else {
                assert!(!moved, "feature {i} must not move");
            }
        }
    }
}

#[test]
fn zero_shift_injection_changes_nothing_but_labels() {
    let data = generate_dataset(200, &TaskSpec::reference(), 0.2, Eq1Interpretation::Symmetric, 19)
        .unwrap();
    let (injected, labels) = inject_anomalies(&data, 0.1, 0.0, 20).unwrap();
    assert_eq!(injected, data);
    assert!(labels.iter().any(|&l| l));
}

#[test]
fn injection_fraction_bounds_are_enforced() {
    let data = generate_dataset(10, &TaskSpec::reference(), 0.0, Eq1Interpretation::Symmetric, 21)
        .unwrap();
    assert!(inject_anomalies(&data, 0.0, 3.0, 1).is_err());
    assert!(inject_anomalies(&data, 1.0, 3.0, 1).is_err());
}
