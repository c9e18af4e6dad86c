use approx::assert_abs_diff_eq;
use svperturb::noise::{
    deviation_fraction, deviation_threshold, moment_ratio, norm_samples, norm_stats, sample_noise,
    NoiseModel, NormStats,
};
use svperturb::stats;
use svperturb::Error;

#[test]
fn same_seed_and_index_give_identical_noise() {
    let model = NoiseModel::new(6, 5, 1.3, 99).unwrap();
    assert_eq!(sample_noise(&model, 17), sample_noise(&model, 17));
    assert_ne!(sample_noise(&model, 17), sample_noise(&model, 18));
    let other = NoiseModel::new(6, 5, 1.3, 100).unwrap();
    assert_ne!(sample_noise(&model, 17), sample_noise(&other, 17));
}

#[test]
fn pooled_entries_have_unit_moments() {
    let model = NoiseModel::new(100, 100, 1.0, 5).unwrap();
    let pooled: Vec<f64> = (0..100)
        .flat_map(|i| sample_noise(&model, i).into_vec())
        .collect();
    assert_eq!(pooled.len(), 1_000_000);
    let mean = stats::mean(&pooled);
    let var = stats::sample_std(&pooled).powi(2);
    assert!(mean.abs() <= 0.005, "mean {mean}");
    assert!((0.99..=1.01).contains(&var), "variance {var}");
}

#[test]
fn noise_scales_with_tau() {
    let one = NoiseModel::new(4, 7, 1.0, 3).unwrap();
    let two = NoiseModel::new(4, 7, 2.0, 3).unwrap();
    assert_eq!(sample_noise(&two, 8), sample_noise(&one, 8).scaled(2.0));
    let zero = NoiseModel::new(4, 7, 0.0, 3).unwrap();
    assert_eq!(sample_noise(&zero, 8).max_abs(), 0.0);
}

#[test]
fn invalid_models_are_rejected() {
    assert!(matches!(
        NoiseModel::new(0, 3, 1.0, 1),
        Err(Error::InvalidConfig(_))
    ));
    assert!(matches!(
        NoiseModel::new(3, 3, -1.0, 1),
        Err(Error::InvalidConfig(_))
    ));
    assert!(matches!(
        NoiseModel::new(3, 3, f64::NAN, 1),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn deviation_threshold_examples() {
    assert_eq!(deviation_threshold(7.5, 1.0, 0.0, 1.0), 7.5);
    assert_eq!(deviation_threshold(7.5, 1.0, 9.0, 0.0), 7.5);
    assert_eq!(deviation_threshold(10.0, 1.0, 4.0, 1.0), 12.0);
}

#[test]
fn square_norm_statistics() {
    let model = NoiseModel::new(200, 200, 1.0, 11).unwrap();
    let s = norm_stats(&model, 200).unwrap();
    let ratio = s.mean_norm / (200f64.sqrt() * 2.0);
    assert!((0.85..=1.0).contains(&ratio), "ratio {ratio}");
    assert!(
        (1.0..=2.0).contains(&s.normalized_mean),
        "{}",
        s.normalized_mean
    );
    assert!(s.std_norm <= 3.0);
    let levels = [0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 1.0];
    let q: Vec<f64> = levels.iter().map(|&p| s.quantile(p).unwrap()).collect();
    assert!(q.windows(2).all(|w| w[0] <= w[1]));
    assert!(q[0] <= s.mean_norm && s.mean_norm <= q[8]);
}

#[test]
fn norm_stats_needs_thirty_replicates() {
    let model = NoiseModel::new(3, 3, 1.0, 1).unwrap();
    assert!(matches!(
        norm_stats(&model, 29),
        Err(Error::InsufficientReplicates { got: 29, need: 30 })
    ));
}

#[test]
fn norm_stats_json_fields() {
    let model = NoiseModel::new(8, 5, 0.5, 2).unwrap();
    let s = norm_stats(&model, 40).unwrap();
    let v = serde_json::to_value(&s).unwrap();
    for key in [
        "m",
        "n",
        "tau",
        "seed",
        "replicates",
        "mean_norm",
        "std_norm",
        "normalized_mean",
        "quantiles",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["quantiles"].as_object().unwrap().len(), 9);
    let back: NormStats = serde_json::from_value(v).unwrap();
    assert_eq!(back, s);
}

#[test]
fn norm_stats_are_reproducible_and_scale_exactly() {
    let one = NoiseModel::new(30, 20, 1.0, 4).unwrap();
    let two = NoiseModel::new(30, 20, 2.0, 4).unwrap();
    let a = norm_stats(&one, 50).unwrap();
    assert_eq!(a, norm_stats(&one, 50).unwrap());
    assert_eq!(norm_stats(&two, 50).unwrap().mean_norm, 2.0 * a.mean_norm);
}

#[test]
fn norms_concentrate_within_five_tau() {
    let model = NoiseModel::new(200, 200, 1.0, 12).unwrap();
    let samples = norm_samples(&model, 1000).unwrap();
    assert!(deviation_fraction(&samples, 5.0) <= 0.01);
}

#[test]
fn norm_moments_are_equivalent() {
    for (n, reps) in [(100, 200), (200, 100), (400, 40)] {
        let model = NoiseModel::new(n, n, 1.0, 13).unwrap();
        let samples = norm_samples(&model, reps).unwrap();
        let scale = (n as f64).sqrt();
        for p in [1.0, 2.0, 4.0] {
            let r = moment_ratio(&samples, p, scale);
            assert!((1.0..=2.5).contains(&r), "n {n}, p {p}: {r}");
        }
    }
}

#[test]
fn moment_ratio_of_constant_samples() {
    assert_abs_diff_eq!(moment_ratio(&[3.0; 10], 4.0, 1.5), 2.0, epsilon = 1e-14);
    assert_eq!(deviation_fraction(&[1.0, 1.0, 1.0, 5.0], 2.0), 0.25);
}
