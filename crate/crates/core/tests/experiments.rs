use std::collections::BTreeSet;

use svperturb::experiments::{
    build_signal, records_from_csv, records_to_csv, scaling_fit, simulate, simulate_sweep,
    summarize, write_json, ExperimentConfig, Factors, SizePoint,
};
use svperturb::linalg::{svd, DenseMatrix};
use svperturb::Error;

fn config(m: usize, n: usize, tau: f64, spectrum: Vec<f64>, replicates: usize) -> ExperimentConfig {
    ExperimentConfig::new(m, n, tau, spectrum, replicates, 31)
}

#[test]
fn identity_factors_give_the_diagonal_signal() {
    let mut cfg = config(2, 2, 0.1, vec![3.0, 1.0], 2);
    cfg.factors = Factors::Identity;
    assert_eq!(
        build_signal(&cfg).unwrap().a,
        DenseMatrix::diag(2, 2, &[3.0, 1.0])
    );
}

#[test]
fn random_factors_keep_the_spectrum() {
    let spectrum = vec![9.0, 4.0, 4.0, 1.5];
    let s = build_signal(&config(12, 7, 0.1, spectrum.clone(), 2)).unwrap();
    let sigma = svd(&s.a).unwrap().singular_values;
    for (x, y) in sigma.iter().zip(&spectrum) {
        assert!((x - y).abs() < 1e-10);
    }
    assert!(sigma[4..].iter().all(|x| x.abs() < 1e-10));
    let again = build_signal(&config(12, 7, 0.1, spectrum, 2)).unwrap();
    assert_eq!(again.a, s.a);
}

#[test]
fn regime_flag_reflects_the_noise_level() {
    let weak = build_signal(&config(20, 20, 1.0, vec![3.0], 2)).unwrap();
    assert!(!weak.regime.satisfied);
    let strong = build_signal(&config(20, 20, 1.0, vec![60.0], 2)).unwrap();
    assert!(strong.regime.satisfied);
    assert!(matches!(
        build_signal(&config(3, 2, 1.0, vec![3.0, 2.0, 1.0], 2)),
        Err(Error::SpectrumTooLong { .. })
    ));
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        config(5, 4, 1.0, vec![2.0, 3.0], 10),
        config(5, 4, 1.0, vec![2.0, -1.0], 10),
        config(5, 4, 1.0, vec![2.0], 1),
        ExperimentConfig {
            t_values: vec![0.5],
            ..config(5, 4, 1.0, vec![2.0], 10)
        },
    ] {
        assert!(
            matches!(simulate(&bad), Err(Error::InvalidConfig(_))),
            "{bad:?}"
        );
    }
    let text = r#"{"m": 4, "n": 3, "tau": 1, "spectrum": [2], "replicates": 3, "master_seed": 1, "colour": 2}"#;
    assert!(ExperimentConfig::from_json(text).is_err());
}

#[test]
fn noiseless_pair_has_no_fluctuation() {
    let sim = simulate(&config(6, 5, 0.0, vec![4.0, 2.0], 2)).unwrap();
    assert_eq!(sim.run.records.len(), 2);
    let (r0, r1) = (&sim.run.records[0], &sim.run.records[1]);
    assert_eq!(r0.bilinear, r1.bilinear);
    for r in [r0, r1] {
        assert_eq!(r.norm_gamma, 0.0);
        assert!(r.proj_dev_norm < 1e-12);
        assert!(r.estimator.as_ref().unwrap().b_tilde.abs() < 1e-12);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = config(15, 10, 0.3, vec![6.0, 3.0, 3.0], 40);
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    let csv = |s: &svperturb::experiments::Simulation| {
        records_to_csv(&s.run.records, &s.schema, &s.config).unwrap()
    };
    assert_eq!(csv(&a), csv(&b));
}

#[test]
fn records_stay_in_regime_when_the_estimate_is_well_below_threshold() {
    let cfg = config(30, 30, 1.0, vec![60.0, 20.0], 400);
    let sim = simulate(&cfg).unwrap();
    assert!(
        sim.regime.mean_norm_estimate <= 0.75 * sim.regime.threshold,
        "{:?}",
        sim.regime
    );
    let inside = sim.run.records.iter().filter(|r| r.in_regime).count();
    assert!(inside as f64 >= 0.99 * 400.0, "{inside}");
}

#[test]
fn identical_records_have_zero_spread() {
    let cfg = config(8, 6, 0.2, vec![5.0, 2.0], 40);
    let sim = simulate(&cfg).unwrap();
    let same = vec![sim.run.records[0].clone(); 40];
    let s = summarize(&same, &sim.schema, &cfg).unwrap();
    for (name, q) in &s.quantities {
        assert_eq!(q.std_error, 0.0, "{name}");
        assert_eq!(q.min, q.max, "{name}");
    }
    for p in &s.bilinear {
        assert_eq!(p.std_error, 0.0);
        assert!(p.quantiles.iter().all(|q| q.quantile == 0.0));
    }
    assert!(matches!(
        summarize(&same[..29], &sim.schema, &cfg),
        Err(Error::InsufficientReplicates { got: 29, need: 30 })
    ));
}

#[test]
fn noiseless_mean_projector_is_exact() {
    let sim = simulate(&config(8, 6, 0.0, vec![5.0, 2.0], 30)).unwrap();
    assert!(sim.summary.unwrap().projector_bias.unwrap().deviation_norm < 1e-12);
}

#[test]
fn concentration_quantiles_scale_like_root_t() {
    let mut cfg = config(200, 200, 1.0, vec![6.0 * 200f64.sqrt()], 400);
    cfg.t_values = vec![1.0, 2.0, 4.0];
    let s = simulate(&cfg).unwrap().summary.unwrap();
    assert!(!s.bilinear.is_empty());
    for p in &s.bilinear {
        let norm: Vec<f64> = p.quantiles.iter().map(|q| q.normalized).collect();
        let (lo, hi) = norm
            .iter()
            .fold((f64::MAX, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        if hi > 0.0 {
            assert!(hi <= 3.0 * lo, "{}: {norm:?}", p.pair);
        }
        for q in &p.quantiles {
            assert!((q.level - (1.0 - (-q.t).exp())).abs() < 1e-15);
        }
    }
}

#[test]
fn synthetic_scaling_fits() {
    let sizes = [100usize, 200, 400, 800];
    let root: Vec<(usize, f64)> = sizes
        .iter()
        .map(|&n| (n, 3.0 / (n as f64).sqrt()))
        .collect();
    let fit = scaling_fit(&root).unwrap();
    assert!((fit.slope + 0.5).abs() < 1e-12);
    let flat: Vec<(usize, f64)> = sizes.iter().map(|&n| (n, 2.0)).collect();
    assert!(scaling_fit(&flat).unwrap().slope.abs() < 1e-12);
    assert!(matches!(
        scaling_fit(&[(100, 1.0), (100, 2.0), (100, 3.0)]),
        Err(Error::DegenerateFit)
    ));
    assert!(scaling_fit(&root[..2]).is_err());
}

#[test]
fn sweep_reports_a_slope_per_quantity() {
    let mut cfg = config(20, 20, 1.0, vec![30.0], 40);
    cfg.size_sweep = Some(vec![
        SizePoint(20, 20, 1.0),
        SizePoint(40, 40, 2f64.sqrt()),
        SizePoint(80, 80, 2.0),
    ]);
    let report = simulate_sweep(&cfg, None).unwrap();
    assert_eq!(report.sizes.len(), 3);
    for fit in report.fits.values() {
        assert!(fit.slope.is_finite() && fit.slope_std_error.is_finite());
    }
}

#[test]
fn records_round_trip_through_csv() {
    let cfg = config(9, 7, 0.4, vec![5.0, 2.0], 6);
    let sim = simulate(&cfg).unwrap();
    let text = records_to_csv(&sim.run.records, &sim.schema, &cfg).unwrap();
    let back = records_from_csv(&text).unwrap();
    assert_eq!(back.records, sim.run.records);
    assert_eq!(back.config, cfg);
    let empty = records_to_csv(&[], &sim.schema, &cfg).unwrap();
    assert_eq!(empty.lines().count(), 3);
}

fn keys(v: &serde_json::Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

#[test]
fn summary_json_has_the_documented_shape() {
    let cfg = config(12, 9, 0.3, vec![6.0, 3.0], 40);
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(&cfg).unwrap();
    let path = dir.path().join("summary.json");
    write_json(&path, sim.summary.as_ref().unwrap()).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let expected: BTreeSet<String> = [
        "version",
        "config",
        "m",
        "n",
        "k",
        "mu",
        "gap",
        "multiplicity",
        "replicates",
        "regime",
        "in_regime_fraction",
        "quantities",
        "bilinear",
        "bias",
        "linf",
        "projector_bias",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    assert_eq!(keys(&v), expected);
    assert!(v["version"].as_str().unwrap().starts_with("svperturb "));
    let probe = &v["bilinear"][0];
    assert_eq!(
        keys(probe),
        [
            "mean",
            "median_abs_fluctuation",
            "pair",
            "quantiles",
            "std_error"
        ]
        .into_iter()
        .map(String::from)
        .collect()
    );
    assert_eq!(
        keys(&probe["quantiles"][0]),
        ["bound_ratio", "level", "normalized", "quantile", "t"]
            .into_iter()
            .map(String::from)
            .collect()
    );
    assert_eq!(
        keys(&v["projector_bias"]),
        [
            "deviation_norm",
            "deviation_scaled",
            "noise_floor",
            "t_norm",
            "t_ratio",
            "t_scaled"
        ]
        .into_iter()
        .map(String::from)
        .collect()
    );
    for q in v["quantities"].as_object().unwrap().values() {
        assert_eq!(
            keys(q),
            ["max", "mean", "median", "min", "std_error"]
                .into_iter()
                .map(String::from)
                .collect()
        );
    }
    assert!(v["bias"]["b_reference_source"] == "in_run");
}
