//! The symmetric dilation of a rectangular matrix, clustering of its
//! singular values, and the spectral projectors of the dilation.
//!
//! For `A` of size `m×n` the dilation `Λ(A) = [[0, A], [Aᵀ, 0]]` has
//! eigenvalues `±σ_i(A)` with eigenvectors `(u_i, ±v_i)/√2`, plus zero with
//! multiplicity `ν₀ = m + n − 2·rank(A)`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::io::{read_matrix_csv, write_matrix_csv};
use crate::linalg::{axpy, dot, norm2, sym_eig, DenseMatrix, LuFactorization, SvdDecomposition};

/// Tolerance on `‖u‖ − 1` accepted by [`theta_from_uv`].
pub const UNIT_TOL: f64 = 1e-9;

/// Default relative tolerance for merging singular values.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

/// `[[0, A], [Aᵀ, 0]]`.
pub fn dilate(a: &DenseMatrix) -> DenseMatrix {
    let (m, n) = a.shape();
    let mut b = DenseMatrix::zeros(m + n, m + n);
    for i in 0..m {
        for j in 0..n {
            let x = a.get(i, j);
            b.set(i, m + j, x);
            b.set(m + j, i, x);
        }
    }
    b
}

/// `(u, sign·v)/√2`, the eigenvector of the dilation for `±σ`.
pub fn theta_from_uv(u: &[f64], v: &[f64], sign: f64) -> Result<Vec<f64>> {
    for x in [u, v] {
        let norm = norm2(x);
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnit { norm });
        }
    }
    let s = sign.signum();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Ok(u.iter()
        .map(|x| x * h)
        .chain(v.iter().map(|x| s * x * h))
        .collect())
}

/// Distinct singular values and their eigengaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumClustering {
    pub m: usize,
    pub n: usize,
    /// `μ_1 > … > μ_d > 0`, each the mean of its merged values.
    pub distinct_values: Vec<f64>,
    /// `Δ_k`, 1-based singular value indices.
    pub index_sets: Vec<Vec<usize>>,
    pub multiplicities: Vec<usize>,
    pub zero_multiplicity: usize,
    pub gaps: Vec<f64>,
}

impl SpectrumClustering {
    pub fn num_clusters(&self) -> usize {
        self.distinct_values.len()
    }

    /// `r = Σ ν_k`.
    pub fn rank(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn check_cluster(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.num_clusters() {
            return Err(Error::IndexOutOfRange {
                index: k,
                max: self.num_clusters(),
            });
        }
        Ok(())
    }

    /// `μ_k` for 1-based `k`.
    pub fn mu(&self, k: usize) -> f64 {
        self.distinct_values[k - 1]
    }

    /// `ḡ_k` for 1-based `k`.
    pub fn gap(&self, k: usize) -> f64 {
        self.gaps[k - 1]
    }

    /// `Δ_k` for 1-based `k`.
    pub fn delta(&self, k: usize) -> &[usize] {
        &self.index_sets[k - 1]
    }

    pub fn multiplicity(&self, k: usize) -> usize {
        self.multiplicities[k - 1]
    }

    /// The cluster containing 1-based singular value index `i`.
    pub fn cluster_of(&self, i: usize) -> Option<usize> {
        self.index_sets
            .iter()
            .position(|d| d.contains(&i))
            .map(|k| k + 1)
    }
}

/// Merges singular values closer than `rel_tol·σ₁` (transitively) and
/// drops those at or below `rel_tol·σ₁` as zero.
pub fn cluster_spectrum(
    singular_values: &[f64],
    m: usize,
    n: usize,
    rel_tol: f64,
) -> Result<SpectrumClustering> {
    if singular_values.len() > m.min(n) {
        return Err(Error::SpectrumTooLong {
            len: singular_values.len(),
            m,
            n,
        });
    }
    if singular_values.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let sigma1 = singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = rel_tol.max(0.0) * sigma1;
    for w in singular_values.windows(2) {
        if w[1] > w[0] + tol || w[1] < 0.0 {
            return Err(Error::InvalidConfig(
                "singular values must be non-negative and non-increasing".into(),
            ));
        }
    }

    let mut index_sets: Vec<Vec<usize>> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut prev: Option<f64> = None;
    for (i, &s) in singular_values.iter().enumerate() {
        if s <= tol {
            break;
        }
        match prev {
            Some(p) if (p - s).abs() <= tol => {
                index_sets.last_mut().unwrap().push(i + 1);
                *sums.last_mut().unwrap() += s;
            }
            _ => {
                index_sets.push(vec![i + 1]);
                sums.push(s);
            }
        }
        prev = Some(s);
    }
    if index_sets.is_empty() {
        return Err(Error::EmptySpectrum);
    }

    let multiplicities: Vec<usize> = index_sets.iter().map(Vec::len).collect();
    let mu: Vec<f64> = sums
        .iter()
        .zip(&multiplicities)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let d = mu.len();
    let gaps = (0..d)
        .map(|k| {
            let above = if k > 0 {
                mu[k - 1] - mu[k]
            } else {
                f64::INFINITY
            };
            let below = if k + 1 < d { mu[k] - mu[k + 1] } else { mu[k] };
            if d == 1 {
                mu[0]
            } else if k == 0 {
                below
            } else {
                above.min(below)
            }
        })
        .collect();
    let rank: usize = multiplicities.iter().sum();

    Ok(SpectrumClustering {
        m,
        n,
        distinct_values: mu,
        index_sets,
        multiplicities,
        zero_multiplicity: m + n - 2 * rank,
        gaps,
    })
}

/// Projectors of one cluster `k` and its mirror `−k`.
#[derive(Debug, Clone)]
pub struct ClusterProjectors {
    pub k: usize,
    pub mu: f64,
    pub multiplicity: usize,
    pub gap: f64,
    pub p: DenseMatrix,
    pub p_neg: DenseMatrix,
    pub uu: DenseMatrix,
    pub uv: DenseMatrix,
    pub vu: DenseMatrix,
    pub vv: DenseMatrix,
    /// `C_k = Σ_{s≠k} P_s / (μ_k − μ_s)`, so that `C_k Γ P_k + P_k Γ C_k` is the
    /// first-order term of `P̃_k − P_k`.
    pub c: DenseMatrix,
    /// Eigenvectors `θ_i`, `i ∈ Δ_k`, spanning the range of `P_k`.
    pub thetas: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ProjectorSet {
    pub m: usize,
    pub n: usize,
    pub clusters: Vec<ClusterProjectors>,
    /// Projector onto the kernel of the dilation, present when `ν₀ > 0`.
    pub p0: Option<DenseMatrix>,
}

impl ProjectorSet {
    pub fn dim(&self) -> usize {
        self.m + self.n
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Cluster `k`, 1-based.
    pub fn cluster(&self, k: usize) -> Result<&ClusterProjectors> {
        if k == 0 || k > self.clusters.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                max: self.clusters.len(),
            });
        }
        Ok(&self.clusters[k - 1])
    }

    /// `P_s` for signed `s`; `s = 0` gives `P₀` (zero matrix when `ν₀ = 0`).
    pub fn projector(&self, s: isize) -> Result<DenseMatrix> {
        match s {
            0 => Ok(self
                .p0
                .clone()
                .unwrap_or_else(|| DenseMatrix::zeros(self.dim(), self.dim()))),
            s if s > 0 => Ok(self.cluster(s as usize)?.p.clone()),
            s => Ok(self.cluster(s.unsigned_abs())?.p_neg.clone()),
        }
    }

    /// Signed indices `±1, …, ±d`, and `0` when `ν₀ > 0`.
    pub fn signed_indices(&self) -> Vec<isize> {
        let d = self.clusters.len() as isize;
        let mut idx: Vec<isize> = (1..=d).chain((1..=d).map(|k| -k)).collect();
        if self.p0.is_some() {
            idx.push(0);
        }
        idx
    }

    /// `P_k x` without forming the matrix.
    pub fn apply_p(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for t in &self.clusters[k - 1].thetas {
            axpy(dot(t, x), t, &mut out);
        }
        out
    }

    /// `C_k x` from the eigenvectors, `O((m+n)·r)`.
    pub fn apply_c(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mu_k = self.clusters[k - 1].mu;
        let mut out = vec![0.0; x.len()];
        let mut range_part = vec![0.0; x.len()];
        for cl in &self.clusters {
            for t in &cl.thetas {
                let mirrored = mirror(t, m);
                let a = dot(t, x);
                let b = dot(&mirrored, x);
                axpy(a, t, &mut range_part);
                axpy(b, &mirrored, &mut range_part);
                if cl.k != k {
                    axpy(a / (mu_k - cl.mu), t, &mut out);
                }
                axpy(b / (mu_k + cl.mu), &mirrored, &mut out);
            }
        }
        if self.p0.is_some() {
            for ((o, xi), ri) in out.iter_mut().zip(x).zip(&range_part) {
                *o += (xi - ri) / mu_k;
            }
        }
        out
    }

    /// Writes one CSV per matrix plus `manifest.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for cl in &self.clusters {
            let k = cl.k;
            let files = [
                ("p", format!("P_{k}.csv"), &cl.p),
                ("p_neg", format!("P_neg{k}.csv"), &cl.p_neg),
                ("uu", format!("P_{k}_uu.csv"), &cl.uu),
                ("uv", format!("P_{k}_uv.csv"), &cl.uv),
                ("vu", format!("P_{k}_vu.csv"), &cl.vu),
                ("vv", format!("P_{k}_vv.csv"), &cl.vv),
                ("c", format!("C_{k}.csv"), &cl.c),
            ];
            let mut names = serde_json::Map::new();
            for (key, name, mat) in files {
                write_matrix_csv(&dir.join(&name), mat)?;
                names.insert(key.into(), name.into());
            }
            entries.push(ManifestCluster {
                k,
                multiplicity: cl.multiplicity,
                mu: cl.mu,
                gap: cl.gap,
                files: names,
            });
        }
        let p0_file = match &self.p0 {
            Some(p0) => {
                write_matrix_csv(&dir.join("P_0.csv"), p0)?;
                Some("P_0.csv".to_string())
            }
            None => None,
        };
        let manifest = Manifest {
            m: self.m,
            n: self.n,
            zero_multiplicity: self.p0.as_ref().map_or(0, |p| p.trace().round() as usize),
            clusters: entries,
            p0: p0_file,
        };
        fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    /// Inverse of [`ProjectorSet::write_dir`]. Range bases are recovered
    /// from the eigenvectors of each `P_k`.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        let load = |files: &serde_json::Map<String, serde_json::Value>,
                    key: &str|
         -> Result<DenseMatrix> {
            let name = files
                .get(key)
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::Parse(format!("manifest entry missing '{key}'")))?;
            read_matrix_csv(&dir.join(name))
        };
        let mut clusters = Vec::new();
        for e in &manifest.clusters {
            let p = load(&e.files, "p")?;
            let eig = sym_eig(&p)?;
            let thetas = (0..e.multiplicity).map(|j| eig.vector(j)).collect();
            clusters.push(ClusterProjectors {
                k: e.k,
                mu: e.mu,
                multiplicity: e.multiplicity,
                gap: e.gap,
                p,
                p_neg: load(&e.files, "p_neg")?,
                uu: load(&e.files, "uu")?,
                uv: load(&e.files, "uv")?,
                vu: load(&e.files, "vu")?,
                vv: load(&e.files, "vv")?,
                c: load(&e.files, "c")?,
                thetas,
            });
        }
        let p0 = match &manifest.p0 {
            Some(name) => Some(read_matrix_csv(&dir.join(name))?),
            None => None,
        };
        Ok(Self {
            m: manifest.m,
            n: manifest.n,
            clusters,
            p0,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    m: usize,
    n: usize,
    zero_multiplicity: usize,
    clusters: Vec<ManifestCluster>,
    p0: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestCluster {
    k: usize,
    multiplicity: usize,
    mu: f64,
    gap: f64,
    files: serde_json::Map<String, serde_json::Value>,
}

/// `(u, v) ↦ (u, −v)`, taking `θ_i` to `θ_{−i}`.
fn mirror(theta: &[f64], m: usize) -> Vec<f64> {
    theta
        .iter()
        .enumerate()
        .map(|(i, &x)| if i < m { x } else { -x })
        .collect()
}

/// Builds every `P_k`, its blocks, `P_{−k}`, `C_k` and `P₀`.
pub fn build_projectors(
    svd: &SvdDecomposition,
    clustering: &SpectrumClustering,
) -> Result<ProjectorSet> {
    let (m, n) = (clustering.m, clustering.n);
    if svd.rows() != m || svd.cols() != n {
        return Err(Error::dims(format!(
            "SVD is {}x{}, clustering expects {m}x{n}",
            svd.rows(),
            svd.cols()
        )));
    }
    if svd.singular_values.len() < clustering.rank() {
        return Err(Error::dims(
            "clustering rank exceeds available singular vectors",
        ));
    }
    let dim = m + n;

    struct Blocks {
        uu: DenseMatrix,
        uv: DenseMatrix,
        vv: DenseMatrix,
        thetas: Vec<Vec<f64>>,
    }
    let blocks: Vec<Blocks> = clustering
        .index_sets
        .iter()
        .map(|delta| {
            let mut b = Blocks {
                uu: DenseMatrix::zeros(m, m),
                uv: DenseMatrix::zeros(m, n),
                vv: DenseMatrix::zeros(n, n),
                thetas: Vec::with_capacity(delta.len()),
            };
            for &i in delta {
                let (u, v) = (svd.u(i - 1), svd.v(i - 1));
                b.uu.rank_one_update(1.0, &u, &u);
                b.uv.rank_one_update(1.0, &u, &v);
                b.vv.rank_one_update(1.0, &v, &v);
                b.thetas.push(theta_from_uv(&u, &v, 1.0)?);
            }
            Ok(b)
        })
        .collect::<Result<_>>()?;

    let assemble = |b: &Blocks, sign: f64| {
        let mut p = DenseMatrix::zeros(dim, dim);
        p.set_block(0, 0, &b.uu.scaled(0.5));
        p.set_block(0, m, &b.uv.scaled(0.5 * sign));
        p.set_block(m, 0, &b.uv.transpose().scaled(0.5 * sign));
        p.set_block(m, m, &b.vv.scaled(0.5));
        p
    };
    let positives: Vec<DenseMatrix> = blocks.iter().map(|b| assemble(b, 1.0)).collect();
    let negatives: Vec<DenseMatrix> = blocks.iter().map(|b| assemble(b, -1.0)).collect();

    let p0 = if clustering.zero_multiplicity > 0 {
        let mut p0 = DenseMatrix::identity(dim);
        for (p, q) in positives.iter().zip(&negatives) {
            p0.add_scaled(-1.0, p);
            p0.add_scaled(-1.0, q);
        }
        Some(p0)
    } else {
        None
    };

    let mu = &clustering.distinct_values;
    let clusters = blocks
        .into_iter()
        .enumerate()
        .map(|(idx, b)| {
            let mu_k = mu[idx];
            let mut c = DenseMatrix::zeros(dim, dim);
            for (s, mu_s) in mu.iter().enumerate() {
                if s != idx {
                    c.add_scaled(1.0 / (mu_k - mu_s), &positives[s]);
                }
                c.add_scaled(1.0 / (mu_k + mu_s), &negatives[s]);
            }
            if let Some(p0) = &p0 {
                c.add_scaled(1.0 / mu_k, p0);
            }
            ClusterProjectors {
                k: idx + 1,
                mu: mu_k,
                multiplicity: clustering.multiplicities[idx],
                gap: clustering.gaps[idx],
                p: positives[idx].clone(),
                p_neg: negatives[idx].clone(),
                vu: b.uv.transpose(),
                uu: b.uu,
                uv: b.uv,
                vv: b.vv,
                c: c.symmetrized(),
                thetas: b.thetas,
            }
        })
        .collect();

    Ok(ProjectorSet { m, n, clusters, p0 })
}

/// Default quadrature size for [`riesz_projector`].
pub const RIESZ_NODES: usize = 64;

/// Condition number above which a resolvent solve is rejected.
pub const RIESZ_MAX_CONDITION: f64 = 1e12;

/// Spectral projector of symmetric `b` onto eigenvalues inside the circle
/// `|η − center| < radius`, by trapezoidal quadrature of
/// `−(1/2πi) ∮ (B − ηI)⁻¹ dη`.
///
/// Each complex resolvent `(B − (a+ib)I)⁻¹ = X + iY` comes from the real
/// system `[[B − aI, bI], [−bI, B − aI]] [X; Y] = [I; 0]`.
pub fn riesz_projector(
    b: &DenseMatrix,
    center: f64,
    radius: f64,
    nodes: usize,
) -> Result<DenseMatrix> {
    if !b.is_square() {
        return Err(Error::dims("riesz_projector needs a square matrix"));
    }
    if !b.all_finite() {
        return Err(Error::NonFinite);
    }
    if b.asymmetry() > crate::linalg::SYMMETRY_TOL * b.max_abs().max(1.0) {
        return Err(Error::NonSymmetric {
            asymmetry: b.asymmetry(),
        });
    }
    if nodes < 16 || radius.is_nan() || radius <= 0.0 || !center.is_finite() {
        return Err(Error::InvalidConfig(
            "contour needs at least 16 nodes and a positive radius".into(),
        ));
    }
    let n = b.rows();
    let mut acc = DenseMatrix::zeros(n, n);
    let mut e = vec![0.0; 2 * n];
    for j in 0..nodes {
        let phi = 2.0 * PI * j as f64 / nodes as f64;
        let (sin, cos) = phi.sin_cos();
        let (a, im) = (center + radius * cos, radius * sin);

        let mut real = DenseMatrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                let x = b.get(r, c) - if r == c { a } else { 0.0 };
                real.set(r, c, x);
                real.set(n + r, n + c, x);
            }
            real.set(r, n + r, im);
            real.set(n + r, r, -im);
        }
        let lu = LuFactorization::new(&real)?;
        let norm_m = crate::linalg::norm_one(&real);

        // Column c of the resolvent; accumulate Re(e^{iφ}(X + iY)).
        let mut inv_norm: f64 = 0.0;
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let sol = lu.solve(&e);
            let (x, y) = sol.split_at(n);
            inv_norm = inv_norm.max(x.iter().chain(y).map(|v| v.abs()).sum());
            for r in 0..n {
                let v = acc.get(r, c) + cos * x[r] - sin * y[r];
                acc.set(r, c, v);
            }
        }
        let condition = norm_m * inv_norm;
        if condition.is_nan() || condition > RIESZ_MAX_CONDITION {
            return Err(Error::EigenvalueOnContour { condition });
        }
    }
    Ok(acc.scaled(-radius / nodes as f64).symmetrized())
}
