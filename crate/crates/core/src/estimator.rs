//! Sign alignment, the bias parameter `b_k`, its two-sample estimate and
//! the rescaled (debiased) singular vector estimator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dilation::{cluster_spectrum, theta_from_uv, DEFAULT_CLUSTER_TOL};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, normalize_sign, svd, DenseMatrix};
use crate::noise::{sample_noise, NoiseModel};
use crate::perturbation::{leading_eigenpairs, EmpiricalProjector, Solver};
use crate::stats;

/// Tolerance on `‖x‖ − 1` for vectors that must be unit.
pub const UNIT_TOL: f64 = 1e-9;

/// Default floor parameter `γ`.
pub const DEFAULT_GAMMA: f64 = 0.25;

fn check_unit(x: &[f64]) -> Result<()> {
    let norm = norm2(x);
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnit { norm });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedEigenvector {
    pub vector: Vec<f64>,
    /// `⟨vector, reference⟩ ≥ 0`.
    pub reference_overlap: f64,
}

/// Chooses the sign of `theta` with non-negative overlap with `reference`.
/// An exactly zero overlap falls back to making the first significant
/// component positive.
pub fn align_sign(theta: &[f64], reference: &[f64]) -> Result<AlignedEigenvector> {
    check_unit(theta)?;
    check_unit(reference)?;
    if theta.len() != reference.len() {
        return Err(Error::dims("align_sign needs equal lengths"));
    }
    let mut vector = theta.to_vec();
    let overlap = dot(theta, reference);
    if overlap < 0.0 {
        vector.iter_mut().for_each(|x| *x = -*x);
    } else if overlap == 0.0 {
        normalize_sign(&mut vector);
    }
    Ok(AlignedEigenvector {
        vector,
        reference_overlap: overlap.abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate {
    /// `⟨θ̃¹, θ̃²⟩ − 1 ∈ [−1, 0]`.
    pub b_tilde: f64,
    pub gamma: f64,
    /// Whether `√(1 + b̃) < √γ / 2`, so the floor sets the divisor.
    pub floor_active: bool,
}

impl BiasEstimate {
    pub fn new(b_tilde: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        let b_tilde = b_tilde.clamp(-1.0, 0.0);
        Ok(Self {
            b_tilde,
            gamma,
            floor_active: (1.0 + b_tilde).sqrt() < gamma.sqrt() / 2.0,
        })
    }

    /// `max(√(1 + b̃), √γ / 2)`.
    pub fn divisor(&self) -> f64 {
        (1.0 + self.b_tilde).sqrt().max(self.gamma.sqrt() / 2.0)
    }
}

/// `b̃ = ⟨θ̃¹, θ̃²⟩ − 1` after aligning `θ̃²` against `θ̃¹`.
pub fn estimate_bias_two_sample(
    theta1: &[f64],
    theta2: &[f64],
    gamma: f64,
) -> Result<BiasEstimate> {
    let aligned = align_sign(theta2, theta1)?;
    BiasEstimate::new(aligned.reference_overlap - 1.0, gamma)
}

/// `θ̃¹ / max(√(1 + b̃), √γ / 2)`.
pub fn debias(theta1: &[f64], bias: &BiasEstimate) -> Vec<f64> {
    let d = bias.divisor();
    theta1.iter().map(|x| x / d).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasOracle {
    /// Monte Carlo estimate of `𝔼⟨θ̃, θ⟩² − 1`.
    pub b_hat: f64,
    pub std_error: f64,
    pub replicates: usize,
}

impl BiasOracle {
    pub fn from_squared_overlaps(sq: &[f64]) -> Self {
        Self {
            b_hat: stats::mean(sq) - 1.0,
            std_error: stats::std_error(sq),
            replicates: sq.len(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    pub solver: Solver,
    pub cluster_tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            solver: Solver::Auto,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        }
    }
}

/// Monte Carlo `b_k` over replicates `0..replicates` of `model`.
pub fn bias_oracle_mc(
    a: &DenseMatrix,
    model: &NoiseModel,
    k: usize,
    replicates: usize,
) -> Result<BiasOracle> {
    bias_oracle_mc_with(a, model, k, replicates, OracleOptions::default())
}

pub fn bias_oracle_mc_with(
    a: &DenseMatrix,
    model: &NoiseModel,
    k: usize,
    replicates: usize,
    options: OracleOptions,
) -> Result<BiasOracle> {
    let (m, n) = a.shape();
    if (model.m, model.n) != (m, n) {
        return Err(Error::dims("noise model and signal dimensions differ"));
    }
    if replicates < 2 {
        return Err(Error::InsufficientReplicates {
            got: replicates,
            need: 2,
        });
    }
    let dec = svd(a)?;
    let clustering = cluster_spectrum(&dec.singular_values, m, n, options.cluster_tol)?;
    clustering.check_cluster(k)?;
    if clustering.multiplicity(k) != 1 {
        return Err(Error::MultiplicityNotOne {
            cluster: k,
            multiplicity: clustering.multiplicity(k),
        });
    }
    if model.tau == 0.0 {
        return Ok(BiasOracle {
            b_hat: 0.0,
            std_error: 0.0,
            replicates,
        });
    }
    let position = clustering.delta(k)[0];
    let theta = theta_from_uv(&dec.u(position - 1), &dec.v(position - 1), 1.0)?;
    let start = lanczos_start(&dec, position);
    let sq: Vec<f64> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let a_tilde = a + &sample_noise(model, i);
            let pairs = leading_eigenpairs(&a_tilde, position, options.solver, &start)?;
            let o = dot(&pairs.thetas[position - 1], &theta);
            Ok(o * o)
        })
        .collect::<Result<_>>()?;
    Ok(BiasOracle::from_squared_overlaps(&sq))
}

/// Lanczos start vector: the leading right singular vectors of the signal
/// plus a small spread component so no direction is exactly missed.
pub(crate) fn lanczos_start(dec: &crate::linalg::SvdDecomposition, q: usize) -> Vec<f64> {
    let n = dec.cols();
    let mut start: Vec<f64> = (0..n)
        .map(|i| 1e-3 * (1.0 + (i % 7) as f64) / (n as f64).sqrt())
        .collect();
    for i in 0..q {
        for (s, v) in start.iter_mut().zip(dec.v(i)) {
            *s += v;
        }
    }
    start
}

/// `ρ_k(x) = ⟨(P̃_k − (1 + b_k) P_k) θ, x⟩`.
pub fn rho_diagnostic(
    p_tilde: &EmpiricalProjector,
    p_k: &DenseMatrix,
    b_k: f64,
    theta: &[f64],
    x: &[f64],
) -> Result<f64> {
    let dim = p_tilde.p_tilde.rows();
    if p_k.shape() != (dim, dim) || theta.len() != dim || x.len() != dim {
        return Err(Error::dims("rho_diagnostic operands disagree in size"));
    }
    let lhs = p_tilde.p_tilde.matvec(theta);
    let rhs = p_k.matvec(theta);
    Ok(lhs
        .iter()
        .zip(&rhs)
        .zip(x)
        .map(|((a, b), xi)| (a - (1.0 + b_k) * b) * xi)
        .sum())
}

/// `ρ_k(x)` for a rank-one `P̃_k = θ̃θ̃ᵀ` and `P_k = θθᵀ`.
pub fn rho_rank_one(theta_tilde: &[f64], theta: &[f64], b_k: f64, x: &[f64]) -> f64 {
    dot(theta_tilde, theta) * dot(theta_tilde, x) - (1.0 + b_k) * dot(theta, x)
}

/// `‖estimate − scale·reference‖_∞`.
pub fn linf_error(estimate: &[f64], reference: &[f64], scale: f64) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::dims("linf_error needs equal lengths"));
    }
    Ok(estimate
        .iter()
        .zip(reference)
        .fold(0.0, |m: f64, (e, r)| m.max((e - scale * r).abs())))
}

/// Debiased estimate of one singular direction from two independent
/// observations of the same signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleDebias {
    /// 1-based singular value position in the first observation.
    pub position: usize,
    pub singular_value: f64,
    /// `θ̃¹`.
    pub theta_tilde: Vec<f64>,
    /// `θ̃²`, aligned against `θ̃¹`.
    pub theta_second: Vec<f64>,
    pub bias: BiasEstimate,
    /// `θ̂^(γ)`.
    pub theta_hat: Vec<f64>,
}

fn simple_position(a: &DenseMatrix, position: usize, solver: Solver) -> Result<(f64, Vec<f64>)> {
    let (m, n) = a.shape();
    let p = m.min(n);
    if position == 0 || position > p {
        return Err(Error::IndexOutOfRange {
            index: position,
            max: p,
        });
    }
    let q = (position + 1).min(p);
    let start: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    let pairs = leading_eigenpairs(a, q, solver, &start)?;
    let tol = DEFAULT_CLUSTER_TOL * pairs.values[0].max(f64::MIN_POSITIVE);
    let s = pairs.values[position - 1];
    let tied_above = position > 1 && pairs.values[position - 2] - s <= tol;
    let tied_below = if q > position {
        s - pairs.values[position] <= tol
    } else {
        position == p && s <= tol && m != n
    };
    if tied_above || tied_below || s <= tol {
        return Err(Error::MultiplicityNotOne {
            cluster: position,
            multiplicity: 1 + tied_above as usize + tied_below as usize,
        });
    }
    Ok((s, pairs.thetas[position - 1].clone()))
}

/// `θ̂^(γ)` for the singular pair at `position` of `a1`, with `b̃` from the
/// matching pair of `a2`.
pub fn debias_two_sample(
    a1: &DenseMatrix,
    a2: &DenseMatrix,
    position: usize,
    gamma: f64,
    solver: Solver,
) -> Result<TwoSampleDebias> {
    if a1.shape() != a2.shape() {
        return Err(Error::dims("the two observations must have the same shape"));
    }
    if !a1.all_finite() || !a2.all_finite() {
        return Err(Error::NonFinite);
    }
    let (singular_value, theta_tilde) = simple_position(a1, position, solver)?;
    let (_, second) = simple_position(a2, position, solver)?;
    let theta_second = align_sign(&second, &theta_tilde)?.vector;
    let bias = estimate_bias_two_sample(&theta_tilde, &theta_second, gamma)?;
    let theta_hat = debias(&theta_tilde, &bias);
    Ok(TwoSampleDebias {
        position,
        singular_value,
        theta_tilde,
        theta_second,
        bias,
        theta_hat,
    })
}
