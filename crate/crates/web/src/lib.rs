//! WebAssembly bindings for the browser demo in `www/`. Every export takes
//! plain numbers (spectra as comma-separated text) and returns a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use svperturb::dilation::{dilate, riesz_projector, RIESZ_NODES};
use svperturb::experiments::suites::projector_invariant_defect;
use svperturb::experiments::{build_signal, simulate, ExperimentConfig, Factors};
use svperturb::linalg::svd;
use svperturb::noise::{sample_noise, NoiseModel};
use svperturb::perturbation::{perturbation_split, weyl_deviation};

/// Largest `m + n` accepted by the dense demo operations.
pub const MAX_DEMO_DIM: usize = 120;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

pub fn parse_spectrum(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

fn demo_config(
    m: usize,
    n: usize,
    tau: f64,
    spectrum: &str,
    replicates: usize,
    seed: u64,
) -> Result<ExperimentConfig, String> {
    if m + n > MAX_DEMO_DIM {
        return Err(format!(
            "m + n must not exceed {MAX_DEMO_DIM} in the browser"
        ));
    }
    let cfg = ExperimentConfig::new(m, n, tau, parse_spectrum(spectrum)?, replicates, seed);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

#[derive(Serialize)]
pub struct PerturbationView {
    pub signal_singular_values: Vec<f64>,
    pub noisy_singular_values: Vec<f64>,
    pub norm_gamma: f64,
    pub gap: f64,
    pub in_regime: bool,
    pub deviation_norm: f64,
    pub deviation_bound: f64,
    pub linear_norm: f64,
    pub remainder_norm: f64,
    pub remainder_bound: f64,
    pub max_eigenvalue_shift: f64,
}

/// One noisy draw: the split of `P̃_k − P_k` and the matching bounds.
pub fn perturbation_view(
    m: usize,
    n: usize,
    spectrum: &str,
    tau: f64,
    k: usize,
    seed: u64,
) -> Result<PerturbationView, String> {
    let mut cfg = demo_config(m, n, tau, spectrum, 2, seed)?;
    cfg.cluster_index = k;
    let signal = build_signal(&cfg).map_err(|e| e.to_string())?;
    let x = sample_noise(
        &NoiseModel::new(m, n, tau, seed).map_err(|e| e.to_string())?,
        0,
    );
    let b = dilate(&signal.a);
    let gamma = dilate(&x);
    let split = perturbation_split(&b, &gamma, &signal.projectors, &signal.clustering, k)
        .map_err(|e| e.to_string())?;
    let weyl = weyl_deviation(&b, &(&b + &gamma)).map_err(|e| e.to_string())?;
    let noisy = svd(&(&signal.a + &x)).map_err(|e| e.to_string())?;
    let ratio = split.norm_gamma / split.gap;
    Ok(PerturbationView {
        signal_singular_values: signal.svd.singular_values.clone(),
        noisy_singular_values: noisy.singular_values,
        norm_gamma: split.norm_gamma,
        gap: split.gap,
        in_regime: split.in_regime,
        deviation_norm: split.deviation_norm,
        deviation_bound: 4.0 * ratio,
        linear_norm: split.linear_norm().map_err(|e| e.to_string())?,
        remainder_norm: split.remainder_norm().map_err(|e| e.to_string())?,
        remainder_bound: 14.0 * ratio * ratio,
        max_eigenvalue_shift: weyl.max_shift,
    })
}

#[derive(Serialize)]
pub struct ProjectorView {
    pub clusters: Vec<ClusterView>,
    pub zero_multiplicity: usize,
    pub invariant_defect: f64,
}

#[derive(Serialize)]
pub struct ClusterView {
    pub k: usize,
    pub mu: f64,
    pub multiplicity: usize,
    pub gap: f64,
    /// `‖P_k(contour) − P_k(eigenvectors)‖_F`.
    pub contour_deviation: f64,
}

/// Clusters of a random matrix with the given spectrum, the projector
/// identity defect and the contour-integral cross-check per cluster.
pub fn projector_view(
    m: usize,
    n: usize,
    spectrum: &str,
    seed: u64,
) -> Result<ProjectorView, String> {
    let cfg = demo_config(m, n, 0.0, spectrum, 2, seed)?;
    let signal = build_signal(&cfg).map_err(|e| e.to_string())?;
    let b = dilate(&signal.a);
    let clusters = signal
        .projectors
        .clusters
        .iter()
        .map(|c| {
            let r =
                riesz_projector(&b, c.mu, c.gap / 2.0, RIESZ_NODES).map_err(|e| e.to_string())?;
            Ok(ClusterView {
                k: c.k,
                mu: c.mu,
                multiplicity: c.multiplicity,
                gap: c.gap,
                contour_deviation: (&r - &c.p).frobenius_norm(),
            })
        })
        .collect::<Result<_, String>>()?;
    Ok(ProjectorView {
        clusters,
        zero_multiplicity: signal.clustering.zero_multiplicity,
        invariant_defect: projector_invariant_defect(&signal.projectors, &signal.a)
            .map_err(|e| e.to_string())?,
    })
}

#[derive(Serialize)]
pub struct DebiasView {
    pub pairs: usize,
    pub b_in_run: f64,
    pub mean_b_tilde: f64,
    pub b_tilde_std_error: f64,
    pub mean_naive_error: f64,
    pub mean_debiased_error: f64,
    pub floor_active_fraction: f64,
}

/// Two-sample debiasing of a rank-one signal `σ₁ = ratio·√n` over `pairs`
/// independent pairs.
pub fn debias_view(
    n: usize,
    ratio: f64,
    pairs: usize,
    gamma: f64,
    seed: u64,
) -> Result<DebiasView, String> {
    let spectrum = format!("{}", ratio * (n as f64).sqrt());
    let mut cfg = demo_config(n, n, 1.0, &spectrum, 2 * pairs, seed)?;
    cfg.gamma = gamma;
    cfg.factors = Factors::Random;
    cfg.validate().map_err(|e| e.to_string())?;
    let sim = simulate(&cfg).map_err(|e| e.to_string())?;
    let bias = sim
        .summary
        .and_then(|s| s.bias)
        .ok_or_else(|| "at least 15 pairs are needed".to_string())?;
    Ok(DebiasView {
        pairs: bias.pairs,
        b_in_run: bias.b_hat_in_run,
        mean_b_tilde: bias.mean_b_tilde,
        b_tilde_std_error: bias.b_tilde_std_error,
        mean_naive_error: bias.mean_naive_error,
        mean_debiased_error: bias.mean_debiased_error,
        floor_active_fraction: bias.floor_active_fraction,
    })
}

fn to_json<T: Serialize>(v: Result<T, String>) -> Result<String, JsValue> {
    v.map_err(js_err)
        .and_then(|v| serde_json::to_string(&v).map_err(js_err))
}

#[wasm_bindgen]
pub fn perturb(
    m: usize,
    n: usize,
    spectrum: &str,
    tau: f64,
    k: usize,
    seed: u32,
) -> Result<String, JsValue> {
    to_json(perturbation_view(m, n, spectrum, tau, k, seed as u64))
}

#[wasm_bindgen]
pub fn projectors(m: usize, n: usize, spectrum: &str, seed: u32) -> Result<String, JsValue> {
    to_json(projector_view(m, n, spectrum, seed as u64))
}

#[wasm_bindgen]
pub fn debias_pairs(
    n: usize,
    ratio: f64,
    pairs: usize,
    gamma: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_json(debias_view(n, ratio, pairs, gamma, seed as u64))
}
