//! Empirical spectral projectors of a perturbed dilation and the split
//! `P̃_k − P_k = L_k(Γ) + S_k(Γ)` into a linear term and a remainder.

use serde::{Deserialize, Serialize};

use crate::dilation::{dilate, ProjectorSet, SpectrumClustering};
use crate::error::{Error, Result};
use crate::linalg::{leading_singular_triplets, operator_norm, sym_eig, sym_eigvals, DenseMatrix};

/// How the leading eigenvectors of a perturbed dilation are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Dense up to [`DENSE_LIMIT`], Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

/// Largest `m + n` handled densely by [`Solver::Auto`].
pub const DENSE_LIMIT: usize = 128;

/// Residual tolerance, relative to `σ̃₁`, for Lanczos triplets.
pub const LANCZOS_TOL: f64 = 1e-11;

impl Solver {
    pub fn use_dense(self, m: usize, n: usize) -> bool {
        match self {
            Solver::Auto => m + n <= DENSE_LIMIT,
            Solver::Dense => true,
            Solver::Lanczos => false,
        }
    }
}

/// Top `q` eigenpairs of `Λ(Ã)`: values `σ̃_1 ≥ … ≥ σ̃_q` and vectors `θ̃_j`.
#[derive(Debug, Clone)]
pub struct LeadingPairs {
    pub values: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
}

/// `start` seeds the Lanczos iteration (length `n`) and is ignored by the
/// dense path.
pub fn leading_eigenpairs(
    a_tilde: &DenseMatrix,
    q: usize,
    solver: Solver,
    start: &[f64],
) -> Result<LeadingPairs> {
    let (m, n) = a_tilde.shape();
    if q == 0 || q > m.min(n) {
        return Err(Error::IndexOutOfRange {
            index: q,
            max: m.min(n),
        });
    }
    if solver.use_dense(m, n) {
        let eig = sym_eig(&dilate(a_tilde))?;
        Ok(LeadingPairs {
            values: eig.eigenvalues[..q].to_vec(),
            thetas: (0..q).map(|j| eig.vector(j)).collect(),
        })
    } else {
        let t = leading_singular_triplets(a_tilde, q, start, LANCZOS_TOL)?;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let thetas = t
            .left
            .iter()
            .zip(&t.right)
            .map(|(u, v)| u.iter().chain(v).map(|x| x * h).collect())
            .collect();
        Ok(LeadingPairs {
            values: t.values,
            thetas,
        })
    }
}

/// Projector onto the eigenvectors of `B̃` at the sorted positions `Δ_k`.
#[derive(Debug, Clone)]
pub struct EmpiricalProjector {
    pub k: usize,
    /// 1-based positions among the eigenvalues of `B̃` in non-increasing order.
    pub positions: Vec<usize>,
    pub p_tilde: DenseMatrix,
    pub uu: DenseMatrix,
    pub uv: DenseMatrix,
    pub vu: DenseMatrix,
    pub vv: DenseMatrix,
    /// Eigenvectors `θ̃_j`, `j ∈ Δ_k`.
    pub thetas: Vec<Vec<f64>>,
    /// All eigenvalues of `B̃`, non-increasing.
    pub eigenvalues: Vec<f64>,
}

impl EmpiricalProjector {
    /// `½[[uu, uv], [vu, vv]]`.
    pub fn reassemble(&self) -> DenseMatrix {
        let m = self.uu.rows();
        let dim = self.p_tilde.rows();
        let mut p = DenseMatrix::zeros(dim, dim);
        p.set_block(0, 0, &self.uu.scaled(0.5));
        p.set_block(0, m, &self.uv.scaled(0.5));
        p.set_block(m, 0, &self.vu.scaled(0.5));
        p.set_block(m, m, &self.vv.scaled(0.5));
        p
    }
}

/// `m` is the row count of the underlying rectangular matrix; the blocks of
/// `P̃_k` are read off at that split.
pub fn empirical_projector(
    b_tilde: &DenseMatrix,
    m: usize,
    k: usize,
    delta_k: &[usize],
) -> Result<EmpiricalProjector> {
    let eig = sym_eig(b_tilde)?;
    let dim = eig.dim();
    if m > dim {
        return Err(Error::dims("row split exceeds matrix size"));
    }
    let limit = m.min(dim - m);
    if delta_k.is_empty() {
        return Err(Error::dims("empty index set"));
    }
    let mut p = DenseMatrix::zeros(dim, dim);
    let mut thetas = Vec::with_capacity(delta_k.len());
    for &j in delta_k {
        if j == 0 || j > limit {
            return Err(Error::IndexOutOfRange {
                index: j,
                max: limit,
            });
        }
        let t = eig.vector(j - 1);
        p.rank_one_update(1.0, &t, &t);
        thetas.push(t);
    }
    let n = dim - m;
    Ok(EmpiricalProjector {
        k,
        positions: delta_k.to_vec(),
        uu: p.submatrix(0, 0, m, m).scaled(2.0),
        uv: p.submatrix(0, m, m, n).scaled(2.0),
        vu: p.submatrix(m, 0, n, m).scaled(2.0),
        vv: p.submatrix(m, m, n, n).scaled(2.0),
        p_tilde: p,
        thetas,
        eigenvalues: eig.eigenvalues,
    })
}

/// `L_k(Γ) = C_k Γ P_k + P_k Γ C_k`.
pub fn linear_term(gamma: &DenseMatrix, projset: &ProjectorSet, k: usize) -> Result<DenseMatrix> {
    let cl = projset.cluster(k)?;
    if gamma.shape() != cl.p.shape() {
        return Err(Error::dims(format!(
            "Gamma is {:?}, projectors are {:?}",
            gamma.shape(),
            cl.p.shape()
        )));
    }
    let gp = gamma.matmul(&cl.p)?;
    let first = cl.c.matmul(&gp)?;
    Ok(&first + &first.transpose())
}

#[derive(Debug, Clone)]
pub struct PerturbationSplit {
    pub l: DenseMatrix,
    pub s: DenseMatrix,
    pub norm_gamma: f64,
    pub gap: f64,
    /// `‖Γ‖ < ḡ_k / 2`.
    pub in_regime: bool,
    pub empirical: EmpiricalProjector,
    /// `‖P̃_k − P_k‖`.
    pub deviation_norm: f64,
}

impl PerturbationSplit {
    pub fn linear_norm(&self) -> Result<f64> {
        operator_norm(&self.l)
    }

    pub fn remainder_norm(&self) -> Result<f64> {
        operator_norm(&self.s)
    }
}

/// Forms `P̃_k` for `B̃ = B + Γ`, the linear term, and `S = (P̃_k − P_k) − L`.
pub fn perturbation_split(
    b: &DenseMatrix,
    gamma: &DenseMatrix,
    projset: &ProjectorSet,
    clustering: &SpectrumClustering,
    k: usize,
) -> Result<PerturbationSplit> {
    clustering.check_cluster(k)?;
    let cl = projset.cluster(k)?;
    if b.shape() != gamma.shape() || b.shape() != cl.p.shape() {
        return Err(Error::dims(
            "B, Gamma and the projector set must have equal shapes",
        ));
    }
    let b_tilde = b + gamma;
    let empirical = empirical_projector(&b_tilde, projset.m, k, clustering.delta(k))?;
    let l = linear_term(gamma, projset, k)?;
    let diff = &empirical.p_tilde - &cl.p;
    let s = &diff - &l;
    let norm_gamma = operator_norm(gamma)?;
    let gap = clustering.gap(k);
    Ok(PerturbationSplit {
        deviation_norm: operator_norm(&diff)?,
        l,
        s,
        norm_gamma,
        gap,
        in_regime: norm_gamma < gap / 2.0,
        empirical,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDeviation {
    /// `|λ_j↓(B̃) − λ_j↓(B)|` for every `j`.
    pub shifts: Vec<f64>,
    pub max_shift: f64,
    /// `‖B̃ − B‖`.
    pub gamma_norm: f64,
}

impl SpectralDeviation {
    pub fn satisfies_weyl(&self, slack: f64) -> bool {
        self.max_shift <= self.gamma_norm + slack
    }
}

pub fn weyl_deviation(b: &DenseMatrix, b_tilde: &DenseMatrix) -> Result<SpectralDeviation> {
    if b.shape() != b_tilde.shape() {
        return Err(Error::dims("weyl_deviation needs equal shapes"));
    }
    let lam = sym_eigvals(b)?;
    let lam_tilde = sym_eigvals(b_tilde)?;
    let shifts: Vec<f64> = lam
        .iter()
        .zip(&lam_tilde)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(SpectralDeviation {
        max_shift: shifts.iter().cloned().fold(0.0, f64::max),
        shifts,
        gamma_norm: operator_norm(&(b_tilde - b))?,
    })
}

/// `xᵀ M y`.
pub fn bilinear_form(m: &DenseMatrix, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != m.rows() || y.len() != m.cols() {
        return Err(Error::dims(format!(
            "bilinear form of a {:?} matrix with vectors of length {} and {}",
            m.shape(),
            x.len(),
            y.len()
        )));
    }
    Ok(m.bilinear(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::{
        build_projectors, cluster_spectrum, dilate, theta_from_uv, DEFAULT_CLUSTER_TOL,
    };
    use crate::linalg::svd;

    fn setup(a: &DenseMatrix) -> (DenseMatrix, SpectrumClustering, ProjectorSet) {
        let s = svd(a).unwrap();
        let (m, n) = a.shape();
        let cl = cluster_spectrum(&s.singular_values, m, n, DEFAULT_CLUSTER_TOL).unwrap();
        let ps = build_projectors(&s, &cl).unwrap();
        (dilate(a), cl, ps)
    }

    #[test]
    fn zero_noise_recovers_projectors() {
        let a = DenseMatrix::diag(3, 2, &[3.0, 1.0]);
        let (b, cl, ps) = setup(&a);
        let zero = DenseMatrix::zeros(5, 5);
        for k in 1..=2 {
            let split = perturbation_split(&b, &zero, &ps, &cl, k).unwrap();
            assert!(split.empirical.p_tilde.max_abs_diff(&ps.clusters[k - 1].p) < 1e-12);
            assert!(split.l.max_abs() == 0.0);
            assert!(split.s.max_abs() < 1e-12);
            assert!(
                split
                    .empirical
                    .reassemble()
                    .max_abs_diff(&split.empirical.p_tilde)
                    < 1e-15
            );
        }
    }

    #[test]
    fn noise_inside_eigenspace_is_annihilated() {
        let a = DenseMatrix::diag(3, 3, &[4.0, 2.0, 1.0]);
        let (_, _, ps) = setup(&a);
        let p = &ps.clusters[0].p;
        let inner =
            DenseMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0).symmetrized();
        let gamma = &(p * &inner) * p;
        assert!(linear_term(&gamma, &ps, 1).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn bilinear_examples() {
        let a = DenseMatrix::diag(2, 2, &[3.0, 1.0]);
        let (_, _, ps) = setup(&a);
        let theta = theta_from_uv(&[1.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((bilinear_form(&ps.clusters[0].p, &theta, &theta).unwrap() - 1.0).abs() < 1e-14);
        let e1 = [1.0, 0.0];
        assert_eq!(
            bilinear_form(&DenseMatrix::identity(2), &e1, &e1).unwrap(),
            1.0
        );
        assert_eq!(
            bilinear_form(&DenseMatrix::zeros(2, 2), &e1, &e1).unwrap(),
            0.0
        );
        assert!(bilinear_form(&DenseMatrix::zeros(2, 2), &[1.0], &e1).is_err());
    }

    #[test]
    fn weyl_uniform_shift() {
        let b = dilate(&DenseMatrix::diag(2, 2, &[3.0, 1.0]));
        let dev = weyl_deviation(&b, &b).unwrap();
        assert_eq!(dev.max_shift, 0.0);
        let shifted = &b + &DenseMatrix::identity(4).scaled(0.3);
        let dev = weyl_deviation(&b, &shifted).unwrap();
        for s in &dev.shifts {
            assert!((s - 0.3).abs() < 1e-12);
        }
        assert!((dev.gamma_norm - 0.3).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_position() {
        let b = dilate(&DenseMatrix::diag(2, 2, &[3.0, 1.0]));
        assert!(matches!(
            empirical_projector(&b, 2, 1, &[7]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }
}
