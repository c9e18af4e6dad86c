//! Verification suites behind `svperturb verify`.
//!
//! Every check compares against an independent route: dense versus
//! low-rank, contour integral versus eigendecomposition, direct Monte Carlo
//! versus closed-form bounds.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Factors, SizePoint};
use super::output::records_to_csv;
use super::signal::orthonormal_columns;
use super::simulate::{simulate, Simulation};
use super::summary::{SweepReport, VERSION};
use crate::dilation::{
    build_projectors, cluster_spectrum, dilate, riesz_projector, ProjectorSet, RIESZ_NODES,
};
use crate::error::{Error, Result};
use crate::estimator::bias_oracle_mc;
use crate::linalg::{svd, sym_eigvals, DenseMatrix};
use crate::noise::{
    deviation_fraction, moment_ratio, norm_samples, sample_noise, GaussianStream, NoiseModel,
    AUX_STREAM_BASE,
};
use crate::stats;

const STREAM_ALGEBRA: u64 = AUX_STREAM_BASE + 10;
const STREAM_RIESZ: u64 = AUX_STREAM_BASE + 11;
const ORACLE_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

pub const ALGEBRA_TOL: f64 = 1e-8;
pub const RIESZ_TOL: f64 = 1e-8;
pub const RIESZ_MIN_GAP: f64 = 0.5;
pub const DEVIATION_BOUND_CONST: f64 = 4.0;
pub const REMAINDER_BOUND_CONST: f64 = 14.0;
/// Absolute slack for Weyl comparisons of eigenvalues computed in floating point.
pub const WEYL_SLACK: f64 = 1e-9;
pub const NORM_MEAN_RANGE: (f64, f64) = (0.85, 1.00);
pub const NORM_DEVIATION_RADIUS: f64 = 5.0;
pub const NORM_DEVIATION_MAX_FRACTION: f64 = 0.01;
pub const NORM_MOMENT_RANGE: (f64, f64) = (1.0, 2.5);
pub const SLOPE_RANGE: (f64, f64) = (-0.65, -0.35);
pub const T_RATIO_SHRINK: f64 = 0.7;
pub const LINF_MAX_SPREAD: f64 = 2.0;
pub const DEBIAS_B_RANGE: (f64, f64) = (-0.30, -0.15);
pub const DEBIAS_SHRINK: f64 = 0.5;
pub const DEBIAS_SE_MULTIPLE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Algebra,
    Bounds,
    Scaling,
    Debias,
    All,
}

impl Suite {
    pub const EACH: [Suite; 4] = [Suite::Algebra, Suite::Bounds, Suite::Scaling, Suite::Debias];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Algebra => "algebra",
            Suite::Bounds => "bounds",
            Suite::Scaling => "scaling",
            Suite::Debias => "debias",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algebra" => Ok(Suite::Algebra),
            "bounds" => Ok(Suite::Bounds),
            "scaling" => Ok(Suite::Scaling),
            "debias" => Ok(Suite::Debias),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidConfig(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraParams {
    pub instances: usize,
    pub max_m: usize,
    pub max_n: usize,
    pub riesz_instances: usize,
    pub riesz_max_dim: usize,
    pub riesz_nodes: usize,
}

impl Default for AlgebraParams {
    fn default() -> Self {
        Self {
            instances: 200,
            max_m: 30,
            max_n: 20,
            riesz_instances: 50,
            riesz_max_dim: 10,
            riesz_nodes: RIESZ_NODES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsParams {
    pub dim: usize,
    pub replicates: usize,
    /// Target `𝔼‖X‖ / (ḡ_k/2)` per noise level; levels above 1 exercise
    /// Weyl outside the perturbative regime.
    pub noise_levels: Vec<f64>,
    pub norm_dim: usize,
    pub norm_replicates: usize,
}

impl Default for BoundsParams {
    fn default() -> Self {
        Self {
            dim: 60,
            replicates: 1000,
            noise_levels: vec![0.2, 0.5, 0.9, 3.0],
            norm_dim: 200,
            norm_replicates: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingParams {
    pub sizes: Vec<usize>,
    pub replicates: usize,
    /// `ḡ_1 / (τ√n)`.
    pub signal_ratio: f64,
    pub oracle_replicates: usize,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            sizes: vec![100, 200, 400, 800],
            replicates: 2000,
            signal_ratio: 6.0,
            oracle_replicates: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DebiasParams {
    pub dim: usize,
    pub signal_ratio: f64,
    pub pairs: usize,
    pub oracle_replicates: usize,
    pub gamma: f64,
    pub determinism_dim: usize,
    pub determinism_replicates: usize,
}

impl Default for DebiasParams {
    fn default() -> Self {
        Self {
            dim: 200,
            signal_ratio: 2.3,
            pairs: 500,
            oracle_replicates: 5000,
            gamma: 0.25,
            determinism_dim: 60,
            determinism_replicates: 200,
        }
    }
}

/// Configuration of `verify`. Every field is optional; the defaults are the
/// acceptance settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub master_seed: u64,
    pub algebra: AlgebraParams,
    pub bounds: BoundsParams,
    pub scaling: ScalingParams,
    pub debias: DebiasParams,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            master_seed: 20_240_601,
            algebra: AlgebraParams::default(),
            bounds: BoundsParams::default(),
            scaling: ScalingParams::default(),
            debias: DebiasParams::default(),
        }
    }
}

impl VerifyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Acceptance criterion number.
    pub criterion: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
    pub budget_secs: f64,
}

impl Check {
    fn new(
        criterion: u32,
        name: &str,
        passed: bool,
        detail: String,
        elapsed_secs: f64,
        budget_secs: f64,
    ) -> Self {
        let within = elapsed_secs <= budget_secs;
        Self {
            criterion,
            name: name.to_string(),
            passed: passed && within,
            detail: if within {
                detail
            } else {
                format!("{detail}; over time budget")
            },
            elapsed_secs,
            budget_secs,
        }
    }

    /// One line: `PASS [3] name (1.2 s / 120 s): detail`.
    pub fn line(&self) -> String {
        format!(
            "{} [{}] {} ({:.1} s / {:.0} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.elapsed_secs,
            self.budget_secs,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub version: String,
    pub suite: Suite,
    pub config: VerifyConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sweep: Option<SweepReport>,
}

pub fn run_suite(suite: Suite, config: &VerifyConfig) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut sweep = None;
    for s in Suite::EACH {
        if suite != Suite::All && suite != s {
            continue;
        }
        match s {
            Suite::Algebra => {
                checks.push(check_algebra(config)?);
                checks.push(check_riesz(config)?);
            }
            Suite::Bounds => {
                checks.push(check_perturbation_bounds(config)?);
                checks.push(check_norms(config)?);
            }
            Suite::Scaling => {
                let (c, report) = check_scaling(config)?;
                checks.extend(c);
                sweep = Some(report);
            }
            Suite::Debias => {
                checks.push(check_debias(config)?);
                checks.push(check_determinism(config)?);
            }
            Suite::All => unreachable!(),
        }
    }
    Ok(SuiteReport {
        version: VERSION.to_string(),
        suite,
        config: config.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        sweep,
    })
}

fn uniform_index(g: &mut GaussianStream, lo: usize, hi: usize) -> usize {
    let z = g.next_standard();
    let u = 0.5 * (1.0 + (z / 2f64.sqrt()).tanh());
    lo + ((u * (hi - lo + 1) as f64) as usize).min(hi - lo)
}

/// `U diag(σ) Vᵀ` with random orthonormal factors and the given spectrum.
fn matrix_with_spectrum(
    g: &mut GaussianStream,
    m: usize,
    n: usize,
    spectrum: &[f64],
) -> DenseMatrix {
    let r = spectrum.len();
    let u = orthonormal_columns(g, m, r);
    let v = orthonormal_columns(g, n, r);
    let mut a = DenseMatrix::zeros(m, n);
    for ((s, ui), vi) in spectrum.iter().zip(&u).zip(&v) {
        a.rank_one_update(*s, ui, vi);
    }
    a
}

/// Descending levels with multiplicities summing to at most `p`, the
/// smallest level at least `floor` and consecutive levels at least `sep`
/// apart.
fn clustered_spectrum(g: &mut GaussianStream, p: usize, floor: f64, sep: f64) -> Vec<f64> {
    let rank = uniform_index(g, 1, p);
    let mut values = Vec::with_capacity(rank);
    let mut level = floor + g.next_standard().abs();
    while values.len() < rank {
        let mult = uniform_index(g, 1, 3).min(rank - values.len());
        values.extend(std::iter::repeat_n(level, mult));
        level += sep + g.next_standard().abs();
    }
    values.reverse();
    values
}

/// Largest Frobenius defect over the projector identities.
pub fn projector_invariant_defect(ps: &ProjectorSet, a: &DenseMatrix) -> Result<f64> {
    let dim = ps.dim();
    let mut worst: f64 = 0.0;
    let mut note = |x: f64| worst = worst.max(x);
    let diff = |x: &DenseMatrix, y: &DenseMatrix| (x - y).frobenius_norm();
    let prod = |x: &DenseMatrix, y: &DenseMatrix| x.matmul(y);

    let mut total = DenseMatrix::zeros(dim, dim);
    let mut spectral = DenseMatrix::zeros(dim, dim);
    for s in ps.signed_indices() {
        let p = ps.projector(s)?;
        note(diff(&prod(&p, &p)?, &p));
        note(diff(&p.transpose(), &p));
        total.add_scaled(1.0, &p);
        if s != 0 {
            let mu = ps.cluster(s.unsigned_abs())?.mu;
            spectral.add_scaled(if s > 0 { mu } else { -mu }, &p);
        }
    }
    note(diff(&total, &DenseMatrix::identity(dim)));
    note(diff(&spectral, &dilate(a)));

    for c in &ps.clusters {
        note(diff(&c.uu.transpose(), &c.uu));
        note(diff(&prod(&c.uu, &c.uu)?, &c.uu));
        note(diff(&c.vv.transpose(), &c.vv));
        note(diff(&prod(&c.vv, &c.vv)?, &c.vv));
        note(diff(&c.vu, &c.uv.transpose()));
        note(diff(&prod(&c.uv, &c.vu)?, &c.uu));
        note(diff(&prod(&c.vu, &c.uv)?, &c.vv));
        for d in ps.clusters.iter().filter(|d| d.k != c.k) {
            note(prod(&c.uu, &d.uu)?.frobenius_norm());
            note(prod(&c.vv, &d.vv)?.frobenius_norm());
            note(prod(&c.vu, &d.uv)?.frobenius_norm());
            note(prod(&c.uv, &d.vu)?.frobenius_norm());
        }
    }

    // Eigenvalue symmetry of the dilation, from its own eigensolver.
    let lam = sym_eigvals(&dilate(a))?;
    for (x, y) in lam.iter().zip(lam.iter().rev()) {
        note((x + y).abs());
    }
    Ok(worst)
}

fn check_algebra(config: &VerifyConfig) -> Result<Check> {
    let p = &config.algebra;
    let start = Instant::now();
    let defects: Vec<(f64, usize)> = (0..p.instances as u64)
        .into_par_iter()
        .map(|i| {
            let mut g = GaussianStream::new(config.master_seed, STREAM_ALGEBRA + (i << 8));
            let m = uniform_index(&mut g, 1, p.max_m);
            let n = uniform_index(&mut g, 1, p.max_n);
            let spectrum = clustered_spectrum(&mut g, m.min(n), 0.2, 0.3);
            let a = matrix_with_spectrum(&mut g, m, n, &spectrum);
            let dec = svd(&a)?;
            let clustering = cluster_spectrum(&dec.singular_values, m, n, 1e-8)?;
            let ps = build_projectors(&dec, &clustering)?;
            let mixed = clustering.multiplicities.iter().any(|&x| x > 1) as usize;
            Ok((projector_invariant_defect(&ps, &a)?, mixed))
        })
        .collect::<Result<_>>()?;
    let worst = defects.iter().map(|d| d.0).fold(0.0, f64::max);
    let with_repeats: usize = defects.iter().map(|d| d.1).sum();
    Ok(Check::new(
        1,
        "projector algebra",
        worst <= ALGEBRA_TOL,
        format!(
            "{} instances ({} with repeated singular values), max defect {worst:.2e} (tol {ALGEBRA_TOL:e})",
            defects.len(),
            with_repeats
        ),
        start.elapsed().as_secs_f64(),
        30.0,
    ))
}

fn check_riesz(config: &VerifyConfig) -> Result<Check> {
    let p = &config.algebra;
    let start = Instant::now();
    let results: Vec<(f64, f64, usize)> = (0..p.riesz_instances as u64)
        .into_par_iter()
        .map(|i| {
            let mut g = GaussianStream::new(config.master_seed, STREAM_RIESZ + (i << 8));
            let m = uniform_index(&mut g, 2, p.riesz_max_dim);
            let n = uniform_index(&mut g, 2, p.riesz_max_dim);
            let spectrum = clustered_spectrum(&mut g, m.min(n), RIESZ_MIN_GAP, RIESZ_MIN_GAP);
            let a = matrix_with_spectrum(&mut g, m, n, &spectrum);
            let dec = svd(&a)?;
            let clustering = cluster_spectrum(&dec.singular_values, m, n, 1e-8)?;
            let ps = build_projectors(&dec, &clustering)?;
            let b = dilate(&a);
            let mut worst: f64 = 0.0;
            let mut min_gap = f64::INFINITY;
            for c in &ps.clusters {
                min_gap = min_gap.min(c.gap);
                let r = riesz_projector(&b, c.mu, c.gap / 2.0, p.riesz_nodes)?;
                worst = worst.max((&r - &c.p).frobenius_norm());
            }
            Ok((worst, min_gap, ps.num_clusters()))
        })
        .collect::<Result<_>>()?;
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let min_gap = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let clusters: usize = results.iter().map(|r| r.2).sum();
    Ok(Check::new(
        2,
        "contour projector oracle",
        worst <= RIESZ_TOL && min_gap >= RIESZ_MIN_GAP,
        format!(
            "{} instances, {clusters} clusters, min gap {min_gap:.3}, {} nodes, max deviation {worst:.2e} (tol {RIESZ_TOL:e})",
            results.len(),
            p.riesz_nodes
        ),
        start.elapsed().as_secs_f64(),
        30.0,
    ))
}

/// Signal instances for the perturbation bounds: spectrum and tracked cluster.
fn perturbation_bound_instances(dim: usize) -> Vec<(Vec<f64>, usize)> {
    let base = vec![
        (vec![6.0, 3.0, 3.0, 1.0], 2),
        (vec![4.0, 2.0], 1),
        (vec![5.0, 5.0, 5.0, 2.0, 1.0], 1),
    ];
    base.into_iter().filter(|(s, _)| s.len() <= dim).collect()
}

fn check_perturbation_bounds(config: &VerifyConfig) -> Result<Check> {
    let p = &config.bounds;
    let start = Instant::now();
    let dim = p.dim;
    let mut in_regime = 0usize;
    let mut linear_fail = 0usize;
    let mut remainder_fail = 0usize;
    let mut weyl_total = 0usize;
    let mut weyl_fail = 0usize;
    let mut worst_linear: f64 = 0.0;
    let mut worst_remainder: f64 = 0.0;
    let mut worst_weyl = f64::NEG_INFINITY;
    for (inst, (spectrum, k)) in perturbation_bound_instances(dim).into_iter().enumerate() {
        let mut cfg = ExperimentConfig::new(
            dim,
            dim,
            1.0,
            spectrum,
            p.replicates,
            config.master_seed + inst as u64,
        );
        cfg.cluster_index = k;
        let clustering = cluster_spectrum(&padded(&cfg.spectrum, dim), dim, dim, cfg.cluster_tol)?;
        let gap = clustering.gap(k);
        let expected_norm = 2.0 * (dim as f64).sqrt();
        for (lvl, level) in p.noise_levels.iter().enumerate() {
            cfg.tau = level * gap / 2.0 / expected_norm;
            cfg.master_seed = config.master_seed + 1000 * (inst as u64 + 1) + lvl as u64;
            let sim = simulate(&cfg)?;
            for r in &sim.run.records {
                if r.norm_gamma < gap / 2.0 {
                    in_regime += 1;
                    let lin = r.proj_dev_norm / (DEVIATION_BOUND_CONST * r.norm_gamma / gap);
                    let rem =
                        r.remainder_norm / (REMAINDER_BOUND_CONST * (r.norm_gamma / gap).powi(2));
                    worst_linear = worst_linear.max(lin);
                    worst_remainder = worst_remainder.max(rem);
                    linear_fail += (lin > 1.0) as usize;
                    remainder_fail += (rem > 1.0) as usize;
                }
            }
            // Weyl over the full spectrum, from dense eigenvalues of both
            // dilations; ‖Γ‖ comes from the record of the same noise draw.
            let model = NoiseModel::new(dim, dim, cfg.tau, cfg.master_seed)?;
            let b = dilate(&build_a(&cfg)?);
            let lam = sym_eigvals(&b)?;
            let devs: Vec<(f64, bool)> = sim
                .run
                .records
                .par_iter()
                .map(|r| {
                    let bt = &b + &dilate(&sample_noise(&model, r.replicate));
                    let shift = sym_eigvals(&bt)?
                        .iter()
                        .zip(&lam)
                        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
                    Ok((shift - r.norm_gamma, shift <= r.norm_gamma + WEYL_SLACK))
                })
                .collect::<Result<_>>()?;
            weyl_total += devs.len();
            weyl_fail += devs.iter().filter(|d| !d.1).count();
            worst_weyl = devs.iter().map(|d| d.0).fold(worst_weyl, f64::max);
        }
    }
    Ok(Check::new(
        3,
        "perturbation bounds",
        in_regime > 0 && linear_fail == 0 && remainder_fail == 0 && weyl_fail == 0,
        format!(
            "{in_regime} in-regime replicates: max ‖P̃−P‖/(4‖Γ‖/ḡ) = {worst_linear:.3}, max ‖S‖/(14(‖Γ‖/ḡ)²) = {worst_remainder:.3}, \
             {linear_fail}+{remainder_fail} violations; Weyl {}/{weyl_total} hold, max(shift − ‖Γ‖) = {worst_weyl:.2e}",
            weyl_total - weyl_fail
        ),
        start.elapsed().as_secs_f64(),
        120.0,
    ))
}

fn padded(spectrum: &[f64], p: usize) -> Vec<f64> {
    let mut s = spectrum.to_vec();
    s.resize(p, 0.0);
    s
}

fn build_a(cfg: &ExperimentConfig) -> Result<DenseMatrix> {
    Ok(super::signal::build_signal(cfg)?.a)
}

fn check_norms(config: &VerifyConfig) -> Result<Check> {
    let p = &config.bounds;
    let start = Instant::now();
    let d = p.norm_dim;
    let model = NoiseModel::new(d, d, 1.0, config.master_seed)?;
    let samples = norm_samples(&model, p.norm_replicates)?;
    let gordon = 2.0 * (d as f64).sqrt();
    let mean_ratio = stats::mean(&samples) / gordon;
    let frac = deviation_fraction(&samples, NORM_DEVIATION_RADIUS * model.tau);
    let scale = model.tau * (d as f64).sqrt();
    let ratios: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&q| moment_ratio(&samples, q, scale))
        .collect();
    let passed = (NORM_MEAN_RANGE.0..=NORM_MEAN_RANGE.1).contains(&mean_ratio)
        && frac <= NORM_DEVIATION_MAX_FRACTION
        && ratios
            .iter()
            .all(|r| (NORM_MOMENT_RANGE.0..=NORM_MOMENT_RANGE.1).contains(r));
    Ok(Check::new(
        4,
        "noise norm concentration",
        passed,
        format!(
            "m=n={d}, R={}: mean/(√m+√n) = {mean_ratio:.4}, fraction beyond 5τ = {frac:.3}, moment ratios p=1,2,4 = {:.3}, {:.3}, {:.3}",
            samples.len(),
            ratios[0],
            ratios[1],
            ratios[2]
        ),
        start.elapsed().as_secs_f64(),
        120.0,
    ))
}

/// The sweep config: identity-embedded rank-one signal with
/// `σ₁ = signal_ratio · τ√n` at every size.
pub fn scaling_config(config: &VerifyConfig) -> ExperimentConfig {
    let p = &config.scaling;
    let n0 = p.sizes[0];
    let mut cfg = ExperimentConfig::new(
        n0,
        n0,
        1.0,
        vec![p.signal_ratio * (n0 as f64).sqrt()],
        p.replicates,
        config.master_seed,
    );
    cfg.factors = Factors::Identity;
    cfg.size_sweep = Some(
        p.sizes
            .iter()
            .map(|&n| SizePoint(n, n, (n as f64 / n0 as f64).sqrt()))
            .collect(),
    );
    cfg
}

fn check_scaling(config: &VerifyConfig) -> Result<(Vec<Check>, SweepReport)> {
    let p = &config.scaling;
    if p.sizes.len() < 3 {
        return Err(Error::InvalidConfig(
            "the scaling suite needs at least 3 sizes".into(),
        ));
    }
    let cfg = scaling_config(config);
    let mut oracle_secs = 0.0;
    let mut sweep_secs = 0.0;
    let mut reports = Vec::new();
    let mut oracles = Vec::new();
    for point in cfg.size_sweep.clone().unwrap_or_default() {
        let mut size_cfg = cfg.at_size(point);
        let t = Instant::now();
        let a = build_a(&size_cfg)?;
        let model = NoiseModel::new(
            size_cfg.m,
            size_cfg.n,
            size_cfg.tau,
            cfg.master_seed ^ ORACLE_SEED_OFFSET,
        )?;
        let oracle = bias_oracle_mc(&a, &model, 1, p.oracle_replicates)?;
        oracle_secs += t.elapsed().as_secs_f64();
        size_cfg.bias_reference = Some(oracle.b_hat.clamp(-1.0, 0.0));
        oracles.push(oracle);
        let t = Instant::now();
        let sim = simulate(&size_cfg)?;
        sweep_secs += t.elapsed().as_secs_f64();
        reports.push(sim.summary.ok_or(Error::InsufficientReplicates {
            got: size_cfg.replicates,
            need: super::summary::MIN_RECORDS,
        })?);
    }
    let sweep = SweepReport::new(&cfg, reports);
    let sizes: Vec<usize> = sweep.sizes.iter().map(|s| s.n).collect();
    let list = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    };

    let medians: Vec<f64> = sweep
        .sizes
        .iter()
        .map(|s| {
            s.probe("e1_e2")
                .map_or(f64::NAN, |p| p.median_abs_fluctuation)
        })
        .collect();
    let fit = sweep.fits.get("median_abs_fluctuation:e1_e2");
    let slope_ok = fit.is_some_and(|f| (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&f.slope));
    let c5 = Check::new(
        5,
        "fluctuation scaling",
        slope_ok,
        format!(
            "n = {sizes:?}, medians {}; slope {}",
            list(&medians),
            fit.map_or("unavailable".into(), |f| format!(
                "{:.3} ± {:.3}",
                f.slope, f.slope_std_error
            ))
        ),
        sweep_secs,
        1200.0,
    );

    let pb: Vec<_> = sweep
        .sizes
        .iter()
        .filter_map(|s| s.projector_bias)
        .collect();
    let ratios: Vec<f64> = pb.iter().map(|b| b.t_ratio).collect();
    let floors: Vec<f64> = pb
        .iter()
        .map(|b| b.noise_floor / b.deviation_norm)
        .collect();
    let monotone = ratios.len() == sizes.len() && ratios.windows(2).all(|w| w[1] < w[0]);
    let at = |n: usize| sizes.iter().position(|&s| s == n).map(|i| ratios[i]);
    let shrink = match (at(100), at(400)) {
        (Some(a), Some(b)) => Some(b / a),
        _ => None,
    };
    let c6 = Check::new(
        6,
        "bias alignment",
        monotone && shrink.is_some_and(|s| s <= T_RATIO_SHRINK),
        format!(
            "‖T‖/‖mean P̃ − P‖ = {}; n=400 vs n=100 factor {}; Monte Carlo floor/‖mean P̃ − P‖ = {}",
            list(&ratios),
            shrink.map_or("unavailable".into(), |s| format!("{s:.3}")),
            list(&floors)
        ),
        sweep_secs,
        1200.0,
    );

    let linf: Vec<f64> = sweep
        .sizes
        .iter()
        .map(|s| s.linf.map_or(f64::NAN, |l| l.normalized_median))
        .collect();
    let (lo, hi) = linf.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    let b_hats: Vec<f64> = oracles.iter().map(|o| o.b_hat).collect();
    let c7 = Check::new(
        7,
        "sup-norm error",
        linf.iter().all(|x| x.is_finite()) && hi / lo < LINF_MAX_SPREAD,
        format!(
            "normalized medians {}; spread {:.3}; oracle b̂ = {} (R={})",
            list(&linf),
            hi / lo,
            list(&b_hats),
            p.oracle_replicates
        ),
        oracle_secs + sweep_secs,
        600.0,
    );
    Ok((vec![c5, c6, c7], sweep))
}

/// Rank-one signal at `σ₁ = signal_ratio · √n` with unit noise.
pub fn debias_config(config: &VerifyConfig) -> ExperimentConfig {
    let p = &config.debias;
    let mut cfg = ExperimentConfig::new(
        p.dim,
        p.dim,
        1.0,
        vec![p.signal_ratio * (p.dim as f64).sqrt()],
        2 * p.pairs,
        config.master_seed,
    );
    cfg.gamma = p.gamma;
    cfg
}

fn check_debias(config: &VerifyConfig) -> Result<Check> {
    let p = &config.debias;
    let start = Instant::now();
    let mut cfg = debias_config(config);
    let a = build_a(&cfg)?;
    let model = NoiseModel::new(cfg.m, cfg.n, cfg.tau, cfg.master_seed ^ ORACLE_SEED_OFFSET)?;
    let oracle = bias_oracle_mc(&a, &model, 1, p.oracle_replicates)?;
    cfg.bias_reference = Some(oracle.b_hat.clamp(-1.0, 0.0));
    let sim = simulate(&cfg)?;
    let bias = sim
        .summary
        .as_ref()
        .and_then(|s| s.bias)
        .ok_or(Error::InsufficientReplicates {
            got: cfg.replicates,
            need: super::summary::MIN_RECORDS,
        })?;
    let in_range = (DEBIAS_B_RANGE.0..=DEBIAS_B_RANGE.1).contains(&oracle.b_hat);
    let shrink = bias.mean_debiased_error.abs() / bias.mean_naive_error.abs();
    let combined_se = (bias.b_tilde_std_error.powi(2) + oracle.std_error.powi(2)).sqrt();
    let z = (bias.mean_b_tilde - oracle.b_hat).abs() / combined_se;
    Ok(Check::new(
        8,
        "two-sample debiasing",
        in_range && shrink <= DEBIAS_SHRINK && z <= DEBIAS_SE_MULTIPLE,
        format!(
            "m=n={}, oracle b̂ = {:.4} ± {:.4}; {} pairs: mean b̃ = {:.4} ({z:.2} SE); mean ⟨θ̃−θ,θ⟩ = {:.5}, mean ⟨θ̂−θ,θ⟩ = {:.5} (ratio {shrink:.3})",
            cfg.m,
            oracle.b_hat,
            oracle.std_error,
            bias.pairs,
            bias.mean_b_tilde,
            bias.mean_naive_error,
            bias.mean_debiased_error
        ),
        start.elapsed().as_secs_f64(),
        300.0,
    ))
}

/// Records CSV of `cfg` computed on a dedicated pool of `threads` workers.
pub fn records_csv_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let sim: Simulation = pool.install(|| simulate(cfg))?;
    records_to_csv(&sim.run.records, &sim.schema, cfg)
}

fn check_determinism(config: &VerifyConfig) -> Result<Check> {
    let p = &config.debias;
    let start = Instant::now();
    let d = p.determinism_dim;
    let mut cfg = ExperimentConfig::new(
        d,
        d,
        1.0,
        vec![4.0 * (d as f64).sqrt(), 2.5 * (d as f64).sqrt()],
        p.determinism_replicates,
        config.master_seed,
    );
    cfg.probe_vectors = super::config::ProbeSpec::default();
    let one = records_csv_with_threads(&cfg, 1)?;
    let eight = records_csv_with_threads(&cfg, 8)?;
    Ok(Check::new(
        9,
        "thread-count determinism",
        one == eight,
        format!(
            "m=n={d}, R={}: {} bytes at 1 thread, {} bytes at 8 threads, {}",
            cfg.replicates,
            one.len(),
            eight.len(),
            if one == eight {
                "identical"
            } else {
                "different"
            }
        ),
        start.elapsed().as_secs_f64(),
        60.0,
    ))
}
