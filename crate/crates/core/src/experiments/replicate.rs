//! Per-replicate measurements.
//!
//! Everything except the eigenvector solve works in low rank: `P̃_k − P_k`,
//! `L_k(Γ)` and `S_k(Γ)` all have ranges inside the span of a few known
//! vectors, so their norms come from small compressed eigenproblems and no
//! `(m+n)×(m+n)` matrix is formed per replicate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::signal::{noise_norm, Probes, Signal};
use crate::error::{Error, Result};
use crate::estimator::{align_sign, estimate_bias_two_sample, lanczos_start};
use crate::linalg::{axpy, dot, sym_norm_on_span, DenseMatrix};
use crate::noise::{sample_noise, NoiseModel};
use crate::perturbation::leading_eigenpairs;

/// Estimator columns, present when the tracked cluster is simple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorFields {
    /// `⟨θ̃, θ⟩ ≥ 0` after alignment.
    pub overlap: f64,
    /// Two-sample estimate pairing this replicate with `replicate ^ 1`.
    pub b_tilde: f64,
    /// `⟨θ̃ − θ, θ⟩`.
    pub naive_error: f64,
    /// `⟨θ̂ − θ, θ⟩` for the rescaled estimator.
    pub debiased_error: f64,
    pub floor_active: bool,
    /// `‖θ̃ − √(1 + b)θ‖_∞` with the reference bias `b`.
    pub linf_error: f64,
    /// `ρ_k(θ) = ⟨P̃θ, θ⟩ − (1 + b)`.
    pub rho_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    /// `‖Γ‖ = ‖X‖`.
    pub norm_gamma: f64,
    /// `‖Γ‖ < ḡ_k / 2`.
    pub in_regime: bool,
    /// `max_{j∈Δ_k} |σ̃_j − μ_k|`.
    pub max_shift_cluster: f64,
    /// `max_{j≤q} |σ̃_j − σ_j|` over the computed leading eigenvalues.
    pub max_shift: f64,
    /// `‖P̃_k − P_k‖`.
    pub proj_dev_norm: f64,
    /// `‖L_k(Γ)‖`.
    pub linear_norm: f64,
    /// `‖S_k(Γ)‖`.
    pub remainder_norm: f64,
    /// `tr(P̃_k P_k) / ν_k`.
    pub overlap_sq: f64,
    /// `‖P_k^⊥ P̃_k P_k‖_F²`.
    pub leakage_sq: f64,
    pub estimator: Option<EstimatorFields>,
    /// `⟨P̃_k x, y⟩` per probe pair.
    pub bilinear: Vec<f64>,
    /// `⟨θ̃, x⟩` per probe vector, simple clusters only.
    pub linear_forms: Vec<f64>,
}

/// Records plus the empirical eigenvectors, kept for the projector-bias
/// summary.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<ReplicateRecord>,
    /// Per replicate, the (aligned) `θ̃_j`, `j ∈ Δ_k`.
    pub thetas: Vec<Vec<Vec<f64>>>,
    /// Reference bias used for the ℓ∞ and `ρ` columns.
    pub b_reference: Option<f64>,
    /// Whether `b_reference` came from the config rather than the run.
    pub b_reference_from_config: bool,
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    signal: &'a Signal,
    probes: &'a Probes,
    model: NoiseModel,
    k: usize,
    delta: Vec<usize>,
    q: usize,
    thetas: Vec<Vec<f64>>,
    start: Vec<f64>,
    dense: bool,
}

struct Raw {
    record: ReplicateRecord,
    thetas: Vec<Vec<f64>>,
}

/// `Λ(X) x = (X x_v, Xᵀ x_u)`.
fn apply_gamma(x: &DenseMatrix, v: &[f64]) -> Vec<f64> {
    let m = x.rows();
    let mut out = x.matvec(&v[m..]);
    out.extend(x.matvec_t(&v[..m]));
    out
}

fn project(basis: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for b in basis {
        axpy(dot(b, v), b, &mut out);
    }
    out
}

impl Context<'_> {
    fn empirical(&self, x: &DenseMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let a_tilde = &self.signal.a + x;
        let pairs = leading_eigenpairs(&a_tilde, self.q, self.config.solver, &self.start)?;
        let mut thetas: Vec<Vec<f64>> = self
            .delta
            .iter()
            .map(|&j| pairs.thetas[j - 1].clone())
            .collect();
        if thetas.len() == 1 {
            thetas[0] = align_sign(&thetas[0], &self.thetas[0])?.vector;
        }
        Ok((pairs.values, thetas))
    }

    fn measure(&self, i: u64) -> Result<Raw> {
        let x = sample_noise(&self.model, i);
        let (values, tilde) = self.empirical(&x)?;
        let norm_gamma = noise_norm(&x, self.dense)?;
        let gap = self.signal.clustering.gap(self.k);
        let mu = self.signal.clustering.mu(self.k);
        let sigma = &self.signal.svd.singular_values;

        let max_shift = values
            .iter()
            .zip(sigma)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let max_shift_cluster = self
            .delta
            .iter()
            .map(|&j| (values[j - 1] - mu).abs())
            .fold(0.0, f64::max);

        let ps = &self.signal.projectors;
        let k = self.k;
        let p_tilde = |v: &[f64]| project(&tilde, v);
        let p = |v: &[f64]| project(&self.thetas, v);
        let linear = |v: &[f64]| {
            let mut out = ps.apply_c(k, &apply_gamma(&x, &p(v)));
            let back = p(&apply_gamma(&x, &ps.apply_c(k, v)));
            axpy(1.0, &back, &mut out);
            out
        };
        let deviation = |v: &[f64]| {
            let mut out = p_tilde(v);
            axpy(-1.0, &p(v), &mut out);
            out
        };

        let c_gamma_theta: Vec<Vec<f64>> = self
            .thetas
            .iter()
            .map(|t| ps.apply_c(k, &apply_gamma(&x, t)))
            .collect();
        let dev_span: Vec<Vec<f64>> = tilde.iter().chain(&self.thetas).cloned().collect();
        let lin_span: Vec<Vec<f64>> = self.thetas.iter().chain(&c_gamma_theta).cloned().collect();
        let rem_span: Vec<Vec<f64>> = dev_span.iter().chain(&c_gamma_theta).cloned().collect();

        let proj_dev_norm = sym_norm_on_span(&dev_span, deviation)?;
        let linear_norm = sym_norm_on_span(&lin_span, linear)?;
        let remainder_norm = sym_norm_on_span(&rem_span, |v| {
            let mut out = deviation(v);
            axpy(-1.0, &linear(v), &mut out);
            out
        })?;

        let nu = self.thetas.len() as f64;
        let cross: Vec<Vec<f64>> = tilde
            .iter()
            .map(|a| self.thetas.iter().map(|b| dot(a, b)).collect())
            .collect();
        let tr_pp: f64 = cross.iter().flatten().map(|c| c * c).sum();
        // ‖MMᵀ‖_F² with M = Θ̃ᵀΘ gives tr((P̃P)²).
        let tr_pp2: f64 = (0..tilde.len())
            .flat_map(|a| (0..tilde.len()).map(move |b| (a, b)))
            .map(|(a, b)| {
                let s: f64 = cross[a].iter().zip(&cross[b]).map(|(x, y)| x * y).sum();
                s * s
            })
            .sum();

        let bilinear = self
            .probes
            .pairs
            .iter()
            .map(|&(a, b)| {
                tilde
                    .iter()
                    .map(|t| dot(t, &self.probes.vectors[a]) * dot(t, &self.probes.vectors[b]))
                    .sum()
            })
            .collect();
        let linear_forms = if tilde.len() == 1 {
            self.probes
                .vectors
                .iter()
                .map(|v| dot(&tilde[0], v))
                .collect()
        } else {
            Vec::new()
        };

        let estimator = (tilde.len() == 1).then(|| EstimatorFields {
            overlap: cross[0][0],
            b_tilde: 0.0,
            naive_error: cross[0][0] - 1.0,
            debiased_error: 0.0,
            floor_active: false,
            linf_error: 0.0,
            rho_theta: 0.0,
        });

        Ok(Raw {
            record: ReplicateRecord {
                replicate: i,
                norm_gamma,
                in_regime: norm_gamma < gap / 2.0,
                max_shift_cluster,
                max_shift,
                proj_dev_norm,
                linear_norm,
                remainder_norm,
                overlap_sq: tr_pp / nu,
                leakage_sq: (tr_pp - tr_pp2).max(0.0),
                estimator,
                bilinear,
                linear_forms,
            },
            thetas: tilde,
        })
    }
}

/// Runs replicates `0..R` on the ambient rayon pool. Record `i` depends
/// only on the config and the noise streams `i` and `i ^ 1`; the optional
/// in-run bias reference is the one quantity pooled over the whole run.
pub fn run_replicates(
    config: &ExperimentConfig,
    signal: &Signal,
    probes: &Probes,
) -> Result<RunOutput> {
    let k = config.cluster_index;
    signal.clustering.check_cluster(k)?;
    let delta = signal.clustering.delta(k).to_vec();
    let q = *delta.last().expect("clusters are non-empty");
    let cl = signal.projectors.cluster(k)?;
    let ctx = Context {
        config,
        signal,
        probes,
        model: NoiseModel::new(config.m, config.n, config.tau, config.master_seed)?,
        k,
        q,
        thetas: cl.thetas.clone(),
        start: lanczos_start(&signal.svd, q),
        dense: config.solver.use_dense(config.m, config.n),
        delta,
    };

    let r = config.replicates as u64;
    let raws: Vec<Raw> = (0..r)
        .into_par_iter()
        .map(|i| ctx.measure(i))
        .collect::<Result<_>>()?;

    let simple = raws.first().is_some_and(|x| x.thetas.len() == 1);
    if !simple {
        let (records, thetas) = raws.into_iter().map(|x| (x.record, x.thetas)).unzip();
        return Ok(RunOutput {
            records,
            thetas,
            b_reference: config.bias_reference,
            b_reference_from_config: config.bias_reference.is_some(),
        });
    }

    // An odd final replicate pairs with one drawn past the end of the run.
    let extra = if r % 2 == 1 {
        let x = sample_noise(&ctx.model, r);
        Some(ctx.empirical(&x)?.1)
    } else {
        None
    };
    let partner_theta = |j: u64| -> &Vec<f64> {
        let p = j ^ 1;
        if p < r {
            &raws[p as usize].thetas[0]
        } else {
            &extra.as_ref().expect("odd run has an extra replicate")[0]
        }
    };
    let bias: Vec<_> = (0..r)
        .map(|j| {
            estimate_bias_two_sample(&raws[j as usize].thetas[0], partner_theta(j), config.gamma)
        })
        .collect::<Result<_>>()?;

    let (b_ref, from_config) = match config.bias_reference {
        Some(b) => (b, true),
        None => {
            let mean_sq = raws.iter().map(|x| x.record.overlap_sq).sum::<f64>() / raws.len() as f64;
            (mean_sq - 1.0, false)
        }
    };
    let theta = &ctx.thetas[0];
    let scale = (1.0 + b_ref).max(0.0).sqrt();
    let mut records = Vec::with_capacity(raws.len());
    let mut thetas = Vec::with_capacity(raws.len());
    for (raw, b) in raws.into_iter().zip(bias) {
        let mut rec = raw.record;
        let est = rec.estimator.as_mut().expect("simple cluster");
        est.b_tilde = b.b_tilde;
        est.floor_active = b.floor_active;
        est.debiased_error = est.overlap / b.divisor() - 1.0;
        est.linf_error = raw.thetas[0]
            .iter()
            .zip(theta)
            .fold(0.0, |m: f64, (a, t)| m.max((a - scale * t).abs()));
        est.rho_theta = est.overlap * est.overlap - (1.0 + b_ref);
        records.push(rec);
        thetas.push(raw.thetas);
    }
    Ok(RunOutput {
        records,
        thetas,
        b_reference: Some(b_ref),
        b_reference_from_config: from_config,
    })
}

/// Column names of the per-probe fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSchema {
    pub bilinear: Vec<String>,
    pub linear_forms: Vec<String>,
    pub estimator: bool,
}

impl RecordSchema {
    pub fn new(probes: &Probes, simple_cluster: bool) -> Self {
        Self {
            bilinear: probes.pair_names(),
            linear_forms: if simple_cluster {
                probes.names.clone()
            } else {
                Vec::new()
            },
            estimator: simple_cluster,
        }
    }
}

pub(crate) fn check_insufficient(got: usize, need: usize) -> Result<()> {
    if got < need {
        return Err(Error::InsufficientReplicates { got, need });
    }
    Ok(())
}
