use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Factors, ProbeKind, ProbeSpec};
use crate::dilation::{build_projectors, cluster_spectrum, ProjectorSet, SpectrumClustering};
use crate::error::{Error, Result};
use crate::linalg::{
    complete_basis, norm2, normalize_sign, operator_norm, orthonormal_basis, top_singular_value,
    DenseMatrix, SvdDecomposition,
};
use crate::noise::{sample_noise, GaussianStream, NoiseModel, AUX_STREAM_BASE};
use crate::stats;

const STREAM_U: u64 = AUX_STREAM_BASE;
const STREAM_V: u64 = AUX_STREAM_BASE + 1;
const STREAM_PROBES: u64 = AUX_STREAM_BASE + 2;
const STREAM_REGIME: u64 = AUX_STREAM_BASE + 1_000_000;

/// Replicates used for the pre-run estimate of `𝔼‖X‖`.
pub const REGIME_REPLICATES: usize = 100;

/// Residual tolerance for Lanczos estimates of `‖X‖`. The Ritz value error
/// is of order the squared residual over the spectral gap.
pub const NOISE_NORM_TOL: f64 = 1e-8;

/// Number of canonical basis vectors used as probes.
pub const CANONICAL_PROBES: usize = 10;

/// Random unit pairs added to the canonical probes.
pub const CANONICAL_RANDOM_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeCheck {
    /// Monte Carlo estimate of `𝔼‖X‖`.
    pub mean_norm_estimate: f64,
    pub replicates: usize,
    /// `(1 − γ) ḡ_k / 2`.
    pub threshold: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct Signal {
    pub a: DenseMatrix,
    pub svd: SvdDecomposition,
    pub clustering: SpectrumClustering,
    pub projectors: ProjectorSet,
    pub regime: RegimeCheck,
}

/// `‖X‖`, densely for small matrices and by Lanczos otherwise.
pub fn noise_norm(x: &DenseMatrix, dense: bool) -> Result<f64> {
    if dense {
        return operator_norm(x);
    }
    if x.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let n = x.cols();
    let start: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
    top_singular_value(x, &start, NOISE_NORM_TOL)
}

pub(crate) fn orthonormal_columns(
    g: &mut GaussianStream,
    dim: usize,
    count: usize,
) -> Vec<Vec<f64>> {
    loop {
        let raw: Vec<Vec<f64>> = (0..count).map(|_| g.standard_vector(dim)).collect();
        let basis = orthonormal_basis(&raw);
        if basis.len() == count {
            return basis;
        }
    }
}

/// The signal `A = U diag(spectrum) Vᵀ` with its analytic SVD, clustering
/// and projectors, plus the regime check.
pub fn build_signal(config: &ExperimentConfig) -> Result<Signal> {
    config.validate()?;
    let (m, n) = (config.m, config.n);
    let p = m.min(n);
    let r = config.spectrum.len();

    let (mut u, mut v): (Vec<Vec<f64>>, Vec<Vec<f64>>) = match config.factors {
        Factors::Identity => (0..r)
            .map(|i| {
                let mut e_m = vec![0.0; m];
                let mut e_n = vec![0.0; n];
                e_m[i] = 1.0;
                e_n[i] = 1.0;
                (e_m, e_n)
            })
            .unzip(),
        Factors::Random => (
            orthonormal_columns(&mut GaussianStream::new(config.master_seed, STREAM_U), m, r),
            orthonormal_columns(&mut GaussianStream::new(config.master_seed, STREAM_V), n, r),
        ),
    };
    for (ui, vi) in u.iter_mut().zip(v.iter_mut()) {
        if normalize_sign(ui) {
            vi.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let complete = |cols: Vec<Vec<f64>>, dim: usize| {
        let mut slots: Vec<Option<Vec<f64>>> = cols.into_iter().map(Some).collect();
        slots.resize(p, None);
        complete_basis(&mut slots, dim);
        slots
            .into_iter()
            .map(|c| c.expect("completed"))
            .collect::<Vec<_>>()
    };
    let u = complete(u, m);
    let v = complete(v, n);
    let mut singular_values = config.spectrum.clone();
    singular_values.resize(p, 0.0);

    let svd = SvdDecomposition {
        singular_values,
        left_vectors: DenseMatrix::from_columns(m, &u),
        right_vectors: DenseMatrix::from_columns(n, &v),
    };
    let a = svd.reconstruct();
    let clustering = cluster_spectrum(&svd.singular_values, m, n, config.cluster_tol)?;
    clustering.check_cluster(config.cluster_index)?;
    let projectors = build_projectors(&svd, &clustering)?;

    let model = NoiseModel::new(m, n, config.tau, config.master_seed)?;
    let dense = config.solver.use_dense(m, n);
    let norms = if config.tau == 0.0 {
        vec![0.0; REGIME_REPLICATES]
    } else {
        use rayon::prelude::*;
        (0..REGIME_REPLICATES as u64)
            .into_par_iter()
            .map(|i| noise_norm(&sample_noise(&model, STREAM_REGIME + i), dense))
            .collect::<Result<Vec<_>>>()?
    };
    let mean_norm_estimate = stats::mean(&norms);
    let threshold = (1.0 - config.gamma) * clustering.gap(config.cluster_index) / 2.0;
    Ok(Signal {
        a,
        svd,
        clustering,
        projectors,
        regime: RegimeCheck {
            mean_norm_estimate,
            replicates: REGIME_REPLICATES,
            threshold,
            satisfied: mean_norm_estimate <= threshold,
        },
    })
}

/// Named probe vectors in `ℝ^{m+n}` and the pairs `(x, y)` evaluated in
/// bilinear forms.
#[derive(Debug, Clone, PartialEq)]
pub struct Probes {
    pub names: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
    pub pairs: Vec<(usize, usize)>,
}

impl Probes {
    pub fn pair_name(&self, i: usize) -> String {
        let (a, b) = self.pairs[i];
        format!("{}_{}", self.names[a], self.names[b])
    }

    pub fn pair_names(&self) -> Vec<String> {
        (0..self.pairs.len()).map(|i| self.pair_name(i)).collect()
    }

    pub fn index_of_pair(&self, x: &str, y: &str) -> Option<usize> {
        self.pairs
            .iter()
            .position(|&(a, b)| self.names[a] == x && self.names[b] == y)
    }
}

pub fn build_probes(config: &ExperimentConfig) -> Result<Probes> {
    let dim = config.m + config.n;
    let mut names = Vec::new();
    let mut vectors = Vec::new();
    let mut pairs = Vec::new();
    let random_pairs = match config.probe_vectors {
        ProbeSpec::Named(ProbeKind::Canonical) => {
            let c = CANONICAL_PROBES.min(dim);
            for i in 0..c {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                names.push(format!("e{}", i + 1));
                vectors.push(e);
            }
            for i in 0..c {
                for j in i..c {
                    pairs.push((i, j));
                }
            }
            CANONICAL_RANDOM_PAIRS
        }
        ProbeSpec::Random(count) => count,
    };
    if random_pairs == 0 && pairs.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one probe pair is required".into(),
        ));
    }
    let mut g = GaussianStream::new(config.master_seed, STREAM_PROBES);
    for k in 0..random_pairs {
        for side in ["x", "y"] {
            let mut w = g.standard_vector(dim);
            let nrm = norm2(&w);
            w.iter_mut().for_each(|x| *x /= nrm);
            names.push(format!("r{}{side}", k + 1));
            vectors.push(w);
        }
        let base = vectors.len() - 2;
        pairs.push((base, base + 1));
    }
    Ok(Probes {
        names,
        vectors,
        pairs,
    })
}
