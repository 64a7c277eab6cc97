use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn corr(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys.iter()) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}

#[test]
fn target_at_origin_is_one_under_both_readings() {
    let spec = TaskSpec::reference();
    for interp in [Eq1Interpretation::Symmetric, Eq1Interpretation::Literal] {
        let y = make_target(0.0, 0.0, &spec, interp);
        assert!((y - 1.0).abs() < 1e-15, "{interp:?}: {y}");
    }
}

#[test]
fn target_closed_form_angles() {
    let spec = TaskSpec::reference();
    // sin(pi/2) + cos(0) = 2
    let y = make_target(1.0, 1.0, &spec, Eq1Interpretation::Symmetric);
    assert!((y - 2.0).abs() < 1e-12);
    // sin(0) + cos(1.4 pi) = -cos(0.4 pi)
    let y = make_target(1.0, -1.0, &spec, Eq1Interpretation::Symmetric);
    let expected = -(0.4 * PI).cos();
    assert!((y - expected).abs() < 1e-12, "{y} vs {expected}");
    assert!((y - (-0.30902)).abs() < 1e-4);
}

#[test]
fn target_matches_direct_formula_oracle() {
    // Independent re-evaluation of the map, written out long-hand.
    let spec = TaskSpec {
        amplitude_sin: 1.3,
        amplitude_cos: 0.8,
        freq_sin: 1.1,
        freq_cos: 0.9,
        noise_sd: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let z1: f64 = rng.random_range(-3.0..3.0);
        let z2: f64 = rng.random_range(-3.0..3.0);
        let sym = 1.3 * (1.1 * PI / 4.0 * (z1 + z2)).sin() + 0.8 * (0.9 * 0.7 * PI * (z1 - z2)).cos();
        let lit = 1.3 * (1.1 * PI / 4.0).sin() * (z1 + z2) + 0.8 * (0.9 * 0.7 * PI * (z1 - z2)).cos();
        assert!((make_target(z1, z2, &spec, Eq1Interpretation::Symmetric) - sym).abs() < 1e-12);
        assert!((make_target(z1, z2, &spec, Eq1Interpretation::Literal) - lit).abs() < 1e-12);
    }
}

#[test]
fn noise_free_features_copy_the_latents() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values = make_features(5.0, -5.0, 0.0, &mut rng);
    assert_eq!(&values[0..3], &[5.0, 5.0, 5.0]);
    assert_eq!(&values[3..6], &[-5.0, -5.0, -5.0]);
}

#[test]
fn group_correlation_structure_at_scale() {
    let n = 100_000;
    let spec = TaskSpec::reference();
    let ds = generate_dataset(n, &spec, 0.0, Eq1Interpretation::Symmetric, 2024).unwrap();
    let col = |j: usize| -> Vec<f64> { ds.samples.iter().map(|s| s.values()[j]).collect() };
    let y: Vec<f64> = ds.targets();

    // Within-group: corr = Var(Z) / (Var(Z) + noise^2) = 1 / 1.01.
    let c12 = corr(&col(0), &col(1));
    assert!((c12 - 1.0 / 1.01).abs() < 0.002, "corr(X1,X2) = {c12}");
    let c45 = corr(&col(3), &col(4));
    assert!(c45 > 0.98, "corr(X4,X5) = {c45}");

    // Cross-group and noise-group correlations vanish.
    assert!(corr(&col(0), &col(3)).abs() < 0.05);
    assert!(corr(&col(0), &col(6)).abs() < 0.05);
    assert!(corr(&col(6), &col(7)).abs() < 0.05);
    assert!(corr(&col(6), &y).abs() < 0.02, "corr(X7,Y) = {}", corr(&col(6), &y));
    assert!(corr(&col(9), &y).abs() < 0.02);
}

#[test]
fn zero_rate_mask_is_all_present() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mask = apply_missing_mask(10, 0.0, &mut rng).unwrap();
    assert!(mask.iter().all(|&m| m));
}

#[test]
fn missing_rate_matches_binomial_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    let mut total_missing = 0usize;
    let mut per_feature = vec![0usize; 10];
    for _ in 0..n {
        let mask = apply_missing_mask(10, 0.2, &mut rng).unwrap();
        for (j, &m) in mask.iter().enumerate() {
            if !m {
                total_missing += 1;
                per_feature[j] += 1;
            }
        }
    }
    let mean_missing = total_missing as f64 / n as f64;
    assert!((mean_missing - 2.0).abs() < 0.05, "mean missing = {mean_missing}");
    for (j, &cnt) in per_feature.iter().enumerate() {
        let rate = cnt as f64 / n as f64;
        assert!((rate - 0.2).abs() < 0.01, "feature {j} missing rate {rate}");
    }
}

#[test]
fn masks_are_never_all_false_even_at_high_rates() {
    // With k=2 and p=0.9 the all-missing draw has probability 0.81, so the
    // redraw path is exercised constantly.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let mask = apply_missing_mask(2, 0.9, &mut rng).unwrap();
        assert!(mask.iter().any(|&m| m));
    }
}

#[test]
fn invalid_missing_rate_is_config_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!(apply_missing_mask(10, 1.0, &mut rng).is_err());
    assert!(apply_missing_mask(10, -0.1, &mut rng).is_err());
    assert!(generate_dataset(10, &TaskSpec::reference(), 1.0, Eq1Interpretation::Symmetric, 0).is_err());
}

#[test]
fn datasets_are_deterministic_in_the_seed() {
    let spec = TaskSpec::reference();
    let a = generate_dataset(500, &spec, 0.2, Eq1Interpretation::Symmetric, 11).unwrap();
    let b = generate_dataset(500, &spec, 0.2, Eq1Interpretation::Symmetric, 11).unwrap();
    assert_eq!(a, b);
    let c = generate_dataset(500, &spec, 0.2, Eq1Interpretation::Symmetric, 12).unwrap();
    assert_ne!(a, c);
}

#[test]
fn single_sample_target_is_consistent_with_the_map() {
    // With zero sensor noise, features 1 and 4 are exactly the latents.
    let spec = TaskSpec::reference().with_noise_sd(0.0);
    let ds = generate_dataset(1, &spec, 0.0, Eq1Interpretation::Symmetric, 77).unwrap();
    let s = &ds.samples[0];
    assert!(s.is_complete());
    let z1 = s.values()[0];
    let z2 = s.values()[3];
    let expected = make_target(z1, z2, &spec, Eq1Interpretation::Symmetric);
    assert!((s.target() - expected).abs() < 1e-12);
}

#[test]
fn remasking_requires_complete_input() {
    let spec = TaskSpec::reference();
    let complete = generate_dataset(50, &spec, 0.0, Eq1Interpretation::Symmetric, 4).unwrap();
    let masked = mask_dataset(&complete, 0.2, 9).unwrap();
    assert_eq!(masked.len(), complete.len());
    // Values and targets survive, only masks change.
    for (a, b) in complete.samples.iter().zip(masked.samples.iter()) {
        assert_eq!(a.target(), b.target());
        for (i, v) in b.observed() {
            assert_eq!(v, a.values()[i]);
        }
    }
    assert!(mask_dataset(&masked, 0.2, 9).is_err());
}

#[test]
fn family_with_zero_scale_repeats_the_base() {
    let base = TaskSpec::reference();
    let cfg = FamilyConfig {
        n_tasks: 3,
        perturbation_scale: 0.0,
        samples_per_task: 10,
        ..FamilyConfig::default()
    };
    let family = generate_task_family(&base, &cfg, 1).unwrap();
    for (spec, ds) in &family {
        assert_eq!(spec, &base);
        assert_eq!(ds.len(), 10);
    }
}

#[test]
fn smaller_perturbation_means_closer_metadata() {
    let base = TaskSpec::reference();
    let dist = |a: &TaskSpec, b: &TaskSpec| -> f64 {
        a.metadata()
            .iter()
            .zip(b.metadata())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let near = generate_task_family(
        &base,
        &FamilyConfig { n_tasks: 2, perturbation_scale: 0.01, samples_per_task: 5, ..FamilyConfig::default() },
        3,
    )
    .unwrap();
    let far = generate_task_family(
        &base,
        &FamilyConfig { n_tasks: 2, perturbation_scale: 1.0, samples_per_task: 5, ..FamilyConfig::default() },
        3,
    )
    .unwrap();
    assert!(dist(&near[0].0, &base) < dist(&far[0].0, &base));
}

#[test]
fn nearest_source_by_metadata_matches_brute_force() {
    let base = TaskSpec::reference();
    let cfg = FamilyConfig { n_tasks: 5, perturbation_scale: 0.5, samples_per_task: 5, ..FamilyConfig::default() };
    for seed in 0..20u64 {
        let family = generate_task_family(&base, &cfg, seed).unwrap();
        let (target, sources) = family.split_last().unwrap();
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        };
        // Nearest by metadata vector.
        let by_metadata = sources
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                dist(&a.0.metadata(), &target.0.metadata())
                    .partial_cmp(&dist(&b.0.metadata(), &target.0.metadata()))
                    .unwrap()
            })
            .unwrap()
            .0;
        // Brute force over raw coefficient tuples.
        let coeffs = |s: &TaskSpec| [s.amplitude_sin, s.amplitude_cos, s.freq_sin, s.freq_cos];
        let by_coeffs = sources
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                dist(&coeffs(&a.0), &coeffs(&target.0))
                    .partial_cmp(&dist(&coeffs(&b.0), &coeffs(&target.0)))
                    .unwrap()
            })
            .unwrap()
            .0;
        assert_eq!(by_metadata, by_coeffs);
    }
}

#[test]
fn family_needs_two_tasks() {
    let cfg = FamilyConfig { n_tasks: 1, ..FamilyConfig::default() };
    assert!(generate_task_family(&TaskSpec::reference(), &cfg, 0).is_err());
}

#[test]
fn csv_round_trip_on_the_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    let spec = TaskSpec::reference();
    let ds = generate_dataset(1000, &spec, 0.2, Eq1Interpretation::Symmetric, 42).unwrap();
    write_csv(&ds, &spec, &path).unwrap();
    let (back, task) = read_csv(&path).unwrap();
    assert_eq!(back, ds);
    assert_eq!(task, spec);
    assert!(sidecar_path(&path).exists());
}

#[test]
fn empty_cells_map_to_mask_false() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut mask = vec![true; 10];
    mask[1] = false;
    mask[8] = false;
    let sample = MaskedSample::new((0..10).map(|i| i as f64).collect(), mask, 1.5).unwrap();
    let ds = Dataset::new(vec![sample], 10, benchmark_group_labels()).unwrap();
    write_csv(&ds, &TaskSpec::reference(), &path).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    let data_row = text.lines().nth(1).unwrap();
    assert_eq!(data_row, "0,0,,2,3,4,5,6,7,,9,1.5");

    let (back, _) = read_csv(&path).unwrap();
    let m = back.samples[0].mask();
    assert!(!m[1] && !m[8]);
    assert_eq!(m.iter().filter(|&&x| x).count(), 8);
}

#[test]
fn all_empty_feature_row_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let spec = TaskSpec::reference();
    let ds = generate_dataset(1, &spec, 0.0, Eq1Interpretation::Symmetric, 1).unwrap();
    write_csv(&ds, &spec, &path).unwrap();
    std::fs::write(&path, "id,f1,f2,y\n0,,,0.5\n").unwrap();
    // Sidecar must agree on width for the row check to reach the mask check.
    let meta = DatasetMeta {
        feature_count: 2,
        group_labels: vec![1, 2],
        task: spec,
    };
    crate::fsutil::atomic_write_json(&sidecar_path(&path), &meta, true).unwrap();
    let err = read_csv(&path).unwrap_err();
    match err {
        Error::Parse { line, ref msg } => {
            assert_eq!(line, 2);
            assert!(msg.contains("all features missing"), "msg: {msg}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn wrong_width_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let spec = TaskSpec::reference();
    std::fs::write(&path, "id,f1,f2,y\n0,1.0,2.0,0.5\n1,1.0,0.5\n").unwrap();
    let meta = DatasetMeta {
        feature_count: 2,
        group_labels: vec![1, 2],
        task: spec,
    };
    crate::fsutil::atomic_write_json(&sidecar_path(&path), &meta, true).unwrap();
    let err = read_csv(&path).unwrap_err();
    match err {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn missing_sidecar_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lonely.csv");
    std::fs::write(&path, "id,f1,y\n0,1.0,2.0\n").unwrap();
    assert!(read_csv(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn csv_round_trip_is_identity(
        k in 1usize..6,
        rows in proptest::collection::vec(
            (proptest::collection::vec(-1e12f64..1e12, 6),
             proptest::collection::vec(proptest::bool::ANY, 6),
             -1e6f64..1e6),
            1..12,
        ),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut samples = Vec::new();
        for (values, mut mask, target) in rows {
            let mut values = values;
            values.truncate(k);
            mask.truncate(k);
            mask[0] = true; // keep the invariant
            samples.push(MaskedSample::new(values, mask, target).unwrap());
        }
        let labels = (0..k).map(|i| (i % 3) as u8 + 1).collect();
        let ds = Dataset::new(samples, k, labels).unwrap();
        let spec = TaskSpec::reference();
        write_csv(&ds, &spec, &path).unwrap();
        let (back, task) = read_csv(&path).unwrap();
        prop_assert_eq!(back, ds);
        prop_assert_eq!(task, spec);
    }
}
