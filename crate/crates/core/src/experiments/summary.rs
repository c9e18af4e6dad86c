use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::replicate::{check_insufficient, RecordSchema, ReplicateRecord};
use super::signal::RegimeCheck;
use crate::dilation::cluster_spectrum;
use crate::error::{Error, Result};
use crate::linalg::{dot, sym_spectral_radius, top_singular_value, DenseMatrix};
use crate::perturbation::DENSE_LIMIT;
use crate::stats::{self, LineFit};

/// Minimum number of records accepted by [`summarize`].
pub const MIN_RECORDS: usize = 30;

/// Residual tolerance for Lanczos norms of the mean-projector bias.
pub const BIAS_NORM_TOL: f64 = 1e-10;

pub const VERSION: &str = concat!("svperturb ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantityStats {
    pub mean: f64,
    pub std_error: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl QuantityStats {
    pub fn of(x: &[f64]) -> Self {
        let s = stats::sorted(x);
        Self {
            mean: stats::mean(x),
            std_error: stats::std_error(x),
            median: stats::quantile_sorted(&s, 0.5),
            min: s.first().copied().unwrap_or(f64::NAN),
            max: s.last().copied().unwrap_or(f64::NAN),
        }
    }
}

/// Empirical `(1 − e^{−t})`-quantile of `|⟨(P̃_k − mean P̃_k)x, y⟩|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationQuantile {
    pub t: f64,
    pub level: f64,
    pub quantile: f64,
    /// `quantile / (τ√t / ḡ_k)`.
    pub normalized: f64,
    /// `quantile / ((τ√t/ḡ_k)(τ(√(m∨n) + √t)/ḡ_k + 1))`, an empirical
    /// constant for the concentration bound.
    pub bound_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub pair: String,
    pub mean: f64,
    pub std_error: f64,
    pub median_abs_fluctuation: f64,
    pub quantiles: Vec<FluctuationQuantile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasSummary {
    pub b_reference: f64,
    /// `"config"` or `"in_run"`.
    pub b_reference_source: BiasSource,
    /// `mean ⟨θ̃, θ⟩² − 1` over this run.
    pub b_hat_in_run: f64,
    pub b_hat_std_error: f64,
    /// Number of disjoint pairs `(2i, 2i+1)`.
    pub pairs: usize,
    pub mean_b_tilde: f64,
    pub b_tilde_std_error: f64,
    pub mean_naive_error: f64,
    pub naive_std_error: f64,
    pub mean_debiased_error: f64,
    pub debiased_std_error: f64,
    pub floor_active_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasSource {
    Config,
    InRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinfSummary {
    pub median: f64,
    /// `√(log(m+n) / (m∨n))`.
    pub normalization: f64,
    pub normalized_median: f64,
}

/// Bias of the empirical projector, with `D = mean P̃_k − P_k` and
/// `T_k = D − P_k D P_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectorBias {
    pub deviation_norm: f64,
    pub t_norm: f64,
    pub t_ratio: f64,
    /// `√(mean ‖P_k^⊥ P̃_k P_k‖_F² / R)`, the size of `T_k` expected from
    /// Monte Carlo error in the pooled mean alone.
    pub noise_floor: f64,
    /// `‖D‖ / (τ²(m∨n)/ḡ_k²)`.
    pub deviation_scaled: f64,
    /// `‖T_k‖ / (τ²√(m∨n)/ḡ_k²)`.
    pub t_scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub mu: f64,
    pub gap: f64,
    pub multiplicity: usize,
    pub replicates: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regime: Option<RegimeCheck>,
    pub in_regime_fraction: f64,
    pub quantities: BTreeMap<String, QuantityStats>,
    pub bilinear: Vec<ProbeSummary>,
    pub bias: Option<BiasSummary>,
    pub linf: Option<LinfSummary>,
    pub projector_bias: Option<ProjectorBias>,
}

impl SummaryReport {
    pub fn probe(&self, pair: &str) -> Option<&ProbeSummary> {
        self.bilinear.iter().find(|p| p.pair == pair)
    }
}

type Field<'a> = &'a dyn Fn(&ReplicateRecord) -> f64;

/// Aggregates records in index order. `b_reference` marks whether the ℓ∞
/// and `ρ` columns used a configured or an in-run bias.
pub fn summarize(
    records: &[ReplicateRecord],
    schema: &RecordSchema,
    config: &ExperimentConfig,
) -> Result<SummaryReport> {
    check_insufficient(records.len(), MIN_RECORDS)?;
    let mut spectrum = config.spectrum.clone();
    spectrum.resize(config.m.min(config.n), 0.0);
    let clustering = cluster_spectrum(&spectrum, config.m, config.n, config.cluster_tol)?;
    let k = config.cluster_index;
    clustering.check_cluster(k)?;
    let gap = clustering.gap(k);
    let column = |f: Field| records.iter().map(f).collect::<Vec<f64>>();

    let mut quantities = BTreeMap::new();
    let scalar: [(&str, Field); 8] = [
        ("norm_gamma", &|r| r.norm_gamma),
        ("max_shift_cluster", &|r| r.max_shift_cluster),
        ("max_shift", &|r| r.max_shift),
        ("proj_dev_norm", &|r| r.proj_dev_norm),
        ("linear_norm", &|r| r.linear_norm),
        ("remainder_norm", &|r| r.remainder_norm),
        ("overlap_sq", &|r| r.overlap_sq),
        ("leakage_sq", &|r| r.leakage_sq),
    ];
    for (name, f) in scalar {
        quantities.insert(name.to_string(), QuantityStats::of(&column(f)));
    }
    if schema.estimator {
        let est: [(&str, Field); 6] = [
            ("overlap", &|r| r.estimator.map_or(f64::NAN, |e| e.overlap)),
            ("b_tilde", &|r| r.estimator.map_or(f64::NAN, |e| e.b_tilde)),
            ("naive_error", &|r| {
                r.estimator.map_or(f64::NAN, |e| e.naive_error)
            }),
            ("debiased_error", &|r| {
                r.estimator.map_or(f64::NAN, |e| e.debiased_error)
            }),
            ("linf_error", &|r| {
                r.estimator.map_or(f64::NAN, |e| e.linf_error)
            }),
            ("rho_theta", &|r| {
                r.estimator.map_or(f64::NAN, |e| e.rho_theta)
            }),
        ];
        for (name, f) in est {
            quantities.insert(name.to_string(), QuantityStats::of(&column(f)));
        }
        for (i, name) in schema.linear_forms.iter().enumerate() {
            quantities.insert(
                format!("linear_{name}"),
                QuantityStats::of(&column(&|r| r.linear_forms[i])),
            );
        }
    }

    let dmax = config.max_dim() as f64;
    let tau = config.tau;
    let bilinear = schema
        .bilinear
        .iter()
        .enumerate()
        .map(|(i, pair)| {
            let values = column(&|r| r.bilinear[i]);
            let mean = stats::mean(&values);
            let abs_dev: Vec<f64> = values.iter().map(|v| (v - mean).abs()).collect();
            let sorted = stats::sorted(&abs_dev);
            let quantiles = config
                .t_values
                .iter()
                .map(|&t| {
                    let level = 1.0 - (-t).exp();
                    let quantile = stats::quantile_sorted(&sorted, level);
                    let unit = tau * t.sqrt() / gap;
                    let bound = unit * (tau * (dmax.sqrt() + t.sqrt()) / gap + 1.0);
                    FluctuationQuantile {
                        t,
                        level,
                        quantile,
                        normalized: quantile / unit,
                        bound_ratio: quantile / bound,
                    }
                })
                .collect();
            ProbeSummary {
                pair: pair.clone(),
                mean,
                std_error: stats::std_error(&values),
                median_abs_fluctuation: stats::quantile_sorted(&sorted, 0.5),
                quantiles,
            }
        })
        .collect();

    let in_regime_fraction =
        records.iter().filter(|r| r.in_regime).count() as f64 / records.len() as f64;

    let (bias, linf) = if schema.estimator {
        let est: Vec<_> = records
            .iter()
            .filter_map(|r| r.estimator.map(|e| (r.replicate, e)))
            .collect();
        let sq: Vec<f64> = records.iter().map(|r| r.overlap_sq).collect();
        let b_hat_in_run = stats::mean(&sq) - 1.0;
        let b_ref = match config.bias_reference {
            Some(b) => b,
            None => b_hat_in_run,
        };
        let replicates: std::collections::BTreeSet<u64> = est.iter().map(|(i, _)| *i).collect();
        let pair_b: Vec<f64> = est
            .iter()
            .filter(|(i, _)| i % 2 == 0 && replicates.contains(&(i + 1)))
            .map(|(_, e)| e.b_tilde)
            .collect();
        let naive: Vec<f64> = est.iter().map(|(_, e)| e.naive_error).collect();
        let debiased: Vec<f64> = est.iter().map(|(_, e)| e.debiased_error).collect();
        let linf: Vec<f64> = est.iter().map(|(_, e)| e.linf_error).collect();
        let normalization = ((config.m + config.n) as f64).ln().sqrt() / dmax.sqrt();
        let median = stats::median(&linf);
        (
            Some(BiasSummary {
                b_reference: b_ref,
                b_reference_source: if config.bias_reference.is_some() {
                    BiasSource::Config
                } else {
                    BiasSource::InRun
                },
                b_hat_in_run,
                b_hat_std_error: stats::std_error(&sq),
                pairs: pair_b.len(),
                mean_b_tilde: stats::mean(&pair_b),
                b_tilde_std_error: stats::std_error(&pair_b),
                mean_naive_error: stats::mean(&naive),
                naive_std_error: stats::std_error(&naive),
                mean_debiased_error: stats::mean(&debiased),
                debiased_std_error: stats::std_error(&debiased),
                floor_active_fraction: est.iter().filter(|(_, e)| e.floor_active).count() as f64
                    / est.len() as f64,
            }),
            Some(LinfSummary {
                median,
                normalization,
                normalized_median: median / normalization,
            }),
        )
    } else {
        (None, None)
    };

    Ok(SummaryReport {
        version: VERSION.to_string(),
        config: config.clone(),
        m: config.m,
        n: config.n,
        k,
        mu: clustering.mu(k),
        gap,
        multiplicity: clustering.multiplicity(k),
        replicates: records.len(),
        regime: None,
        in_regime_fraction,
        quantities,
        bilinear,
        bias,
        linf,
        projector_bias: None,
    })
}

/// `mean_i Σ_{j∈Δ_k} θ̃_j θ̃_jᵀ`, accumulated in replicate order.
pub fn mean_projector(replicate_thetas: &[Vec<Vec<f64>>], dim: usize) -> Result<DenseMatrix> {
    check_insufficient(replicate_thetas.len(), 1)?;
    let mut d = DenseMatrix::zeros(dim, dim);
    let w = 1.0 / replicate_thetas.len() as f64;
    for rep in replicate_thetas {
        for t in rep {
            if t.len() != dim {
                return Err(Error::dims("eigenvector length differs from the dimension"));
            }
            d.rank_one_update(w, t, t);
        }
    }
    Ok(d.symmetrized())
}

/// Spectral radius of a symmetric matrix, by Lanczos above the dense limit.
fn radius(s: &DenseMatrix) -> Result<f64> {
    if s.rows() <= DENSE_LIMIT {
        return sym_spectral_radius(s);
    }
    if s.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let start: Vec<f64> = (0..s.rows()).map(|i| 1.0 + (i % 5) as f64 * 0.2).collect();
    top_singular_value(s, &start, BIAS_NORM_TOL)
}

/// `‖D‖` and `‖T_k‖` from the pooled mean projector.
pub fn projector_bias(
    mean: &DenseMatrix,
    thetas: &[Vec<f64>],
    leakage_sq: &[f64],
    tau: f64,
    gap: f64,
    max_dim: usize,
) -> Result<ProjectorBias> {
    let r = leakage_sq.len();
    check_insufficient(r, 1)?;
    let mut d = mean.clone();
    for t in thetas {
        d.rank_one_update(-1.0, t, t);
    }
    let deviation_norm = radius(&d)?;

    // T = D − P D P, with P D P assembled from the small matrix ΘᵀDΘ.
    let d_theta: Vec<Vec<f64>> = thetas.iter().map(|t| d.matvec(t)).collect();
    let mut t_mat = d;
    for ta in thetas {
        for (tb, d_tb) in thetas.iter().zip(&d_theta) {
            t_mat.rank_one_update(-dot(ta, d_tb), ta, tb);
        }
    }
    let t_norm = radius(&t_mat.symmetrized())?;
    let dmax = max_dim as f64;
    let noise_floor = (stats::mean(leakage_sq) / r as f64).sqrt();
    Ok(ProjectorBias {
        deviation_norm,
        t_norm,
        t_ratio: if deviation_norm > 0.0 {
            t_norm / deviation_norm
        } else {
            0.0
        },
        noise_floor,
        deviation_scaled: deviation_norm * gap * gap / (tau * tau * dmax),
        t_scaled: t_norm * gap * gap / (tau * tau * dmax.sqrt()),
    })
}

/// Log-log least squares of `value` against `size`.
pub fn scaling_fit(points: &[(usize, f64)]) -> Result<LineFit> {
    if points.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "a scaling fit needs at least 3 sizes, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|(s, v)| *s == 0 || v.is_nan() || *v <= 0.0)
    {
        return Err(Error::InvalidConfig(
            "scaling fit needs positive sizes and values".into(),
        ));
    }
    let x: Vec<f64> = points.iter().map(|(s, _)| (*s as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    stats::ols(&x, &y)
}

/// Reports of a size sweep and the fitted slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub sizes: Vec<SummaryReport>,
    pub fits: BTreeMap<String, LineFit>,
}

impl SweepReport {
    /// Fits every tracked quantity that is positive at all sizes.
    pub fn new(config: &ExperimentConfig, sizes: Vec<SummaryReport>) -> Self {
        let mut tracked: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
        for s in &sizes {
            let size = s.config.max_dim();
            let mut push = |name: String, v: f64| tracked.entry(name).or_default().push((size, v));
            for p in &s.bilinear {
                push(
                    format!("median_abs_fluctuation:{}", p.pair),
                    p.median_abs_fluctuation,
                );
            }
            if let Some(pb) = &s.projector_bias {
                push("deviation_norm".into(), pb.deviation_norm);
                push("t_norm".into(), pb.t_norm);
                push("t_ratio".into(), pb.t_ratio);
            }
            if let Some(l) = &s.linf {
                push("linf_normalized_median".into(), l.normalized_median);
            }
            if let Some(q) = s.quantities.get("norm_gamma") {
                push("mean_norm_gamma".into(), q.mean);
            }
        }
        let fits = tracked
            .into_iter()
            .filter(|(_, pts)| pts.len() == sizes.len())
            .filter_map(|(name, pts)| scaling_fit(&pts).ok().map(|f| (name, f)))
            .collect();
        Self {
            version: VERSION.to_string(),
            config: config.clone(),
            sizes,
            fits,
        }
    }
}
