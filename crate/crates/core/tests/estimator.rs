mod common;

use approx::assert_abs_diff_eq;
use common::{gaussian, with_spectrum};
use proptest::prelude::*;
use svperturb::dilation::{dilate, theta_from_uv};
use svperturb::estimator::{
    align_sign, bias_oracle_mc, debias, debias_two_sample, estimate_bias_two_sample, linf_error,
    rho_diagnostic, rho_rank_one, BiasEstimate,
};
use svperturb::linalg::{dot, norm2, orthonormal_basis, svd, DenseMatrix};
use svperturb::noise::{sample_noise, NoiseModel};
use svperturb::perturbation::{empirical_projector, leading_eigenpairs, Solver};
use svperturb::stats;
use svperturb::Error;

fn unit(x: &[f64]) -> Vec<f64> {
    let n = norm2(x);
    x.iter().map(|v| v / n).collect()
}

/// Rank-one signal `σ u vᵀ` with `σ = ratio·τ·√(m∨n)` and its `θ`.
fn spike(m: usize, n: usize, ratio: f64, tau: f64, seed: u64) -> (DenseMatrix, Vec<f64>) {
    let sigma = ratio * tau * (m.max(n) as f64).sqrt();
    let a = with_spectrum(m, n, &[sigma], seed);
    let dec = svd(&a).unwrap();
    let theta = theta_from_uv(&dec.u(0), &dec.v(0), 1.0).unwrap();
    (a, theta)
}

fn leading_theta(a_tilde: &DenseMatrix, reference: &[f64]) -> Vec<f64> {
    let start = vec![1.0; a_tilde.cols()];
    let pairs = leading_eigenpairs(a_tilde, 1, Solver::Dense, &start).unwrap();
    align_sign(&pairs.thetas[0], reference).unwrap().vector
}

#[test]
fn align_examples() {
    let r = unit(&[1.0, 2.0, -0.5]);
    let neg: Vec<f64> = r.iter().map(|x| -x).collect();
    let flipped = align_sign(&neg, &r).unwrap();
    assert_eq!(flipped.vector, r);
    assert_abs_diff_eq!(flipped.reference_overlap, 1.0, epsilon = 1e-15);
    assert_eq!(align_sign(&r, &r).unwrap().vector, r);

    let e1 = [1.0, 0.0, 0.0];
    let perp = [0.0, -1.0, 0.0];
    let once = align_sign(&perp, &e1).unwrap();
    assert_eq!(once.vector, vec![0.0, 1.0, 0.0]);
    assert_eq!(align_sign(&once.vector, &e1).unwrap(), once);
    assert!(matches!(
        align_sign(&[2.0, 0.0, 0.0], &e1),
        Err(Error::NonUnit { .. })
    ));
}

#[test]
fn two_sample_extremes() {
    let e1 = [1.0, 0.0];
    let e2 = [0.0, 1.0];
    assert_eq!(
        estimate_bias_two_sample(&e1, &e1, 0.25).unwrap().b_tilde,
        0.0
    );
    assert_eq!(
        estimate_bias_two_sample(&e1, &[-1.0, 0.0], 0.25)
            .unwrap()
            .b_tilde,
        0.0
    );
    let orth = estimate_bias_two_sample(&e1, &e2, 0.25).unwrap();
    assert_eq!(orth.b_tilde, -1.0);
    assert!(orth.floor_active);
}

#[test]
fn debias_arithmetic() {
    let theta = unit(&[3.0, -1.0, 2.0]);
    let none = BiasEstimate::new(0.0, 0.25).unwrap();
    assert_eq!(debias(&theta, &none), theta);

    let floor = BiasEstimate::new(-1.0, 0.25).unwrap();
    assert!(floor.floor_active);
    assert_abs_diff_eq!(floor.divisor(), 0.25, epsilon = 1e-15);
    assert_abs_diff_eq!(norm2(&debias(&theta, &floor)), 4.0, epsilon = 1e-12);

    let mid = BiasEstimate::new(-0.19, 0.25).unwrap();
    assert!(!mid.floor_active);
    assert_abs_diff_eq!(mid.divisor(), 0.9, epsilon = 1e-15);
    assert_abs_diff_eq!(norm2(&debias(&theta, &mid)), 1.0 / 0.9, epsilon = 1e-12);

    assert!(matches!(
        BiasEstimate::new(-0.1, 1.0),
        Err(Error::InvalidConfig(_))
    ));
    assert!(matches!(
        BiasEstimate::new(-0.1, 0.0),
        Err(Error::InvalidConfig(_))
    ));
}

#[test]
fn oracle_without_noise_is_zero() {
    let (a, _) = spike(6, 4, 3.0, 1.0, 1);
    let model = NoiseModel::new(6, 4, 0.0, 2).unwrap();
    let o = bias_oracle_mc(&a, &model, 1, 10).unwrap();
    assert_eq!(o.b_hat, 0.0);
    assert_eq!(o.std_error, 0.0);
}

#[test]
fn oracle_rejects_repeated_clusters() {
    let a = with_spectrum(6, 4, &[3.0, 3.0], 1);
    let model = NoiseModel::new(6, 4, 0.1, 2).unwrap();
    assert!(matches!(
        bias_oracle_mc(&a, &model, 1, 10),
        Err(Error::MultiplicityNotOne {
            multiplicity: 2,
            ..
        })
    ));
}

#[test]
fn oracle_lies_in_the_unit_interval() {
    for (ratio, seed) in [(0.5, 3), (1.5, 4), (4.0, 5)] {
        let (a, _) = spike(20, 15, ratio, 1.0, seed);
        let model = NoiseModel::new(20, 15, 1.0, seed).unwrap();
        let o = bias_oracle_mc(&a, &model, 1, 300).unwrap();
        assert!(
            o.b_hat >= -1.0 - 3.0 * o.std_error && o.b_hat <= 3.0 * o.std_error,
            "{o:?}"
        );
    }
}

#[test]
fn two_sample_mean_matches_the_oracle() {
    let (m, n, tau) = (30, 30, 1.0);
    let (a, theta) = spike(m, n, 3.0, tau, 6);
    let oracle =
        bias_oracle_mc(&a, &NoiseModel::new(m, n, tau, 1_000_001).unwrap(), 1, 5000).unwrap();
    let model = NoiseModel::new(m, n, tau, 7).unwrap();
    let b_tilde: Vec<f64> = (0..2000u64)
        .map(|j| {
            let t1 = leading_theta(&(&a + &sample_noise(&model, 2 * j)), &theta);
            let t2 = leading_theta(&(&a + &sample_noise(&model, 2 * j + 1)), &theta);
            estimate_bias_two_sample(&t1, &t2, 0.25).unwrap().b_tilde
        })
        .collect();
    let se = (stats::std_error(&b_tilde).powi(2) + oracle.std_error.powi(2)).sqrt();
    let diff = (stats::mean(&b_tilde) - oracle.b_hat).abs();
    assert!(
        diff <= 3.0 * se,
        "mean b̃ {} vs b̂ {} (se {se})",
        stats::mean(&b_tilde),
        oracle.b_hat
    );
}

#[test]
fn bias_scaling_constant_is_stable_across_sizes() {
    let (ratio, tau) = (4.0, 1.0);
    let constants: Vec<f64> = [100usize, 200, 400]
        .iter()
        .map(|&n| {
            let (a, _) = spike(n, n, ratio, tau, n as u64);
            let o = bias_oracle_mc(&a, &NoiseModel::new(n, n, tau, 8).unwrap(), 1, 200).unwrap();
            let gap = ratio * tau * (n as f64).sqrt();
            o.b_hat.abs() * gap * gap / (tau * tau * n as f64)
        })
        .collect();
    let (lo, hi) = constants
        .iter()
        .fold((f64::MAX, 0.0f64), |(l, h), &c| (l.min(c), h.max(c)));
    assert!(lo > 0.0 && hi <= 2.0 * lo, "{constants:?}");
}

#[test]
fn debiasing_removes_most_of_the_alignment_bias() {
    let (m, n, tau) = (40, 40, 1.0);
    let (a, theta) = spike(m, n, 2.3, tau, 9);
    let oracle =
        bias_oracle_mc(&a, &NoiseModel::new(m, n, tau, 1_000_002).unwrap(), 1, 2000).unwrap();
    assert!(oracle.b_hat <= -0.15, "{oracle:?}");
    let model = NoiseModel::new(m, n, tau, 10).unwrap();
    let (mut naive, mut debiased) = (Vec::new(), Vec::new());
    for j in 0..400u64 {
        let a1 = &a + &sample_noise(&model, 2 * j);
        let a2 = &a + &sample_noise(&model, 2 * j + 1);
        let d = debias_two_sample(&a1, &a2, 1, 0.25, Solver::Dense).unwrap();
        let t1 = align_sign(&d.theta_tilde, &theta).unwrap().vector;
        let sign = dot(&t1, &d.theta_tilde).signum();
        naive.push(dot(&t1, &theta) - 1.0);
        debiased.push(sign * dot(&d.theta_hat, &theta) - 1.0);
    }
    let (mn, md) = (stats::mean(&naive), stats::mean(&debiased));
    assert!(md.abs() <= 0.5 * mn.abs(), "naive {mn}, debiased {md}");
}

#[test]
fn rho_examples() {
    let (a, theta) = spike(5, 4, 3.0, 1.0, 11);
    let b = dilate(&a);
    let exact = empirical_projector(&b, 5, 1, &[1]).unwrap();
    let p = DenseMatrix::outer(&theta, &theta);
    for seed in 0..5 {
        let x = gaussian(9, 1, seed).into_vec();
        assert!(rho_diagnostic(&exact, &p, 0.0, &theta, &x).unwrap().abs() < 1e-12);
    }
    let noisy = &a + &gaussian(5, 4, 12).scaled(0.3);
    let e = empirical_projector(&dilate(&noisy), 5, 1, &[1]).unwrap();
    let t = &e.thetas[0];
    let mut x = gaussian(9, 1, 13).into_vec();
    for basis in orthonormal_basis(&[theta.clone(), e.p_tilde.matvec(&theta)]) {
        let c = dot(&x, &basis);
        x.iter_mut().zip(&basis).for_each(|(xi, bi)| *xi -= c * bi);
    }
    assert!(rho_diagnostic(&e, &p, -0.1, &theta, &x).unwrap().abs() < 1e-12);
    let direct = rho_diagnostic(&e, &p, -0.1, &theta, &theta).unwrap();
    assert_abs_diff_eq!(direct, dot(t, &theta).powi(2) - 0.9, epsilon = 1e-12);
    assert_abs_diff_eq!(
        direct,
        rho_rank_one(t, &theta, -0.1, &theta),
        epsilon = 1e-12
    );
    assert!(rho_diagnostic(&e, &p, 0.0, &theta, &[1.0]).is_err());
}

#[test]
fn rho_at_theta_is_centered() {
    let (m, n, tau) = (20, 20, 1.0);
    let (a, theta) = spike(m, n, 3.0, tau, 14);
    let oracle =
        bias_oracle_mc(&a, &NoiseModel::new(m, n, tau, 1_000_003).unwrap(), 1, 5000).unwrap();
    let model = NoiseModel::new(m, n, tau, 15).unwrap();
    let rho: Vec<f64> = (0..2000u64)
        .map(|i| {
            let t = leading_theta(&(&a + &sample_noise(&model, i)), &theta);
            rho_rank_one(&t, &theta, oracle.b_hat, &theta)
        })
        .collect();
    let se = (stats::std_error(&rho).powi(2) + oracle.std_error.powi(2)).sqrt();
    assert!(
        stats::mean(&rho).abs() <= 3.0 * se,
        "mean {} se {se}",
        stats::mean(&rho)
    );
}

#[test]
fn linf_examples() {
    let r = [0.5, -0.25, 1.0];
    let scaled: Vec<f64> = r.iter().map(|x| 0.8 * x).collect();
    assert_eq!(linf_error(&scaled, &r, 0.8).unwrap(), 0.0);
    let bumped = [0.5 + 1e-3, -0.25, 1.0];
    assert_abs_diff_eq!(linf_error(&bumped, &r, 1.0).unwrap(), 1e-3, epsilon = 1e-15);
    assert!(linf_error(&r, &[1.0], 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn alignment_is_idempotent(len in 1usize..12, seed in any::<u64>()) {
        let t = unit(&gaussian(len, 1, seed).into_vec());
        let r = unit(&gaussian(len, 1, seed ^ 3).into_vec());
        let once = align_sign(&t, &r).unwrap();
        prop_assert!(once.reference_overlap >= 0.0);
        prop_assert!((norm2(&once.vector) - 1.0).abs() < 1e-10);
        prop_assert_eq!(align_sign(&once.vector, &r).unwrap(), once);
    }

    #[test]
    fn two_sample_estimate_lies_in_range(len in 1usize..12, seed in any::<u64>(), gamma in 0.01f64..0.99) {
        let t1 = unit(&gaussian(len, 1, seed).into_vec());
        let t2 = unit(&gaussian(len, 1, seed ^ 5).into_vec());
        let b = estimate_bias_two_sample(&t1, &t2, gamma).unwrap();
        prop_assert!((-1.0..=0.0).contains(&b.b_tilde));
        let norm = norm2(&debias(&t1, &b));
        prop_assert!(norm >= 1.0 - 1e-12 && norm <= 2.0 / gamma.sqrt() + 1e-12);
    }
}
