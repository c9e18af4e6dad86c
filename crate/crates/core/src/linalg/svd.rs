//! Singular value decomposition by one-sided (Hestenes) Jacobi rotations.

use super::matrix::{axpy, dot, norm2, normalize_sign, DenseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SvdDecomposition {
    /// Non-increasing, non-negative; length `min(m, n)`.
    pub singular_values: Vec<f64>,
    /// m × min(m, n), orthonormal columns.
    pub left_vectors: DenseMatrix,
    /// n × min(m, n), orthonormal columns.
    pub right_vectors: DenseMatrix,
}

impl SvdDecomposition {
    pub fn rows(&self) -> usize {
        self.left_vectors.rows()
    }

    pub fn cols(&self) -> usize {
        self.right_vectors.rows()
    }

    pub fn u(&self, i: usize) -> Vec<f64> {
        self.left_vectors.col(i)
    }

    pub fn v(&self, i: usize) -> Vec<f64> {
        self.right_vectors.col(i)
    }

    /// `Σ σ_i u_i v_iᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.rows(), self.cols());
        for (i, &s) in self.singular_values.iter().enumerate() {
            if s != 0.0 {
                a.rank_one_update(s, &self.u(i), &self.v(i));
            }
        }
        a
    }
}

const MAX_SWEEPS: usize = 80;

/// Thin SVD. Singular vectors are sign-normalized pairwise: the first
/// significant component of `u_i` is non-negative and `v_i` follows.
pub fn svd(a: &DenseMatrix) -> Result<SvdDecomposition> {
    if !a.all_finite() {
        return Err(Error::NonFinite);
    }
    let (m, n) = a.shape();
    if m >= n {
        let (sigma, u, v) = hestenes(a)?;
        Ok(finish(sigma, u, v, m, n))
    } else {
        let (sigma, v, u) = hestenes(&a.transpose())?;
        Ok(finish(sigma, u, v, m, n))
    }
}

/// One-sided Jacobi on a tall (rows ≥ cols) matrix. Returns singular values,
/// left vectors and right vectors as column lists, unsorted.
#[allow(clippy::type_complexity)]
fn hestenes(a: &DenseMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (m, n) = a.shape();
    let mut w = a.columns();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let tol = f64::EPSILON * (m as f64).sqrt().max(1.0);

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence("one-sided Jacobi SVD".into()));
    }

    let sigma: Vec<f64> = w.iter().map(|c| norm2(c)).collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let zero_tol = (m.max(n) as f64) * f64::EPSILON * smax;
    let mut u: Vec<Option<Vec<f64>>> = w
        .into_iter()
        .zip(&sigma)
        .map(|(c, &s)| (s > zero_tol && s > 0.0).then(|| c.iter().map(|x| x / s).collect()))
        .collect();
    complete_basis(&mut u, m);
    Ok((sigma, u.into_iter().map(Option::unwrap).collect(), v))
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fill `None` slots with unit vectors orthogonal to every other slot,
/// drawn from the canonical basis by Gram–Schmidt.
pub(crate) fn complete_basis(cols: &mut [Option<Vec<f64>>], dim: usize) {
    let mut candidate = 0usize;
    for slot in 0..cols.len() {
        if cols[slot].is_some() {
            continue;
        }
        while candidate < dim {
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for c in cols.iter().flatten() {
                    let proj = dot(c, &e);
                    axpy(-proj, c, &mut e);
                }
            }
            let nrm = norm2(&e);
            if nrm > 0.5 {
                e.iter_mut().for_each(|x| *x /= nrm);
                cols[slot] = Some(e);
                break;
            }
        }
        assert!(cols[slot].is_some(), "basis completion exhausted the space");
    }
}

fn finish(
    sigma: Vec<f64>,
    mut u: Vec<Vec<f64>>,
    mut v: Vec<Vec<f64>>,
    m: usize,
    n: usize,
) -> SvdDecomposition {
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let p = m.min(n);
    let mut left = DenseMatrix::zeros(m, p);
    let mut right = DenseMatrix::zeros(n, p);
    let mut values = Vec::with_capacity(p);
    for (dst, &src) in order.iter().enumerate() {
        if normalize_sign(&mut u[src]) {
            v[src].iter_mut().for_each(|x| *x = -*x);
        }
        left.set_col(dst, &u[src]);
        right.set_col(dst, &v[src]);
        values.push(sigma[src]);
    }
    SvdDecomposition {
        singular_values: values,
        left_vectors: left,
        right_vectors: right,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_defect;

    fn check_contract(a: &DenseMatrix, dec: &SvdDecomposition) {
        let s1 = dec.singular_values.first().copied().unwrap_or(0.0);
        for (i, &s) in dec.singular_values.iter().enumerate() {
            let av = a.matvec(&dec.v(i));
            let u = dec.u(i);
            let resid = av
                .iter()
                .zip(&u)
                .map(|(x, y)| (x - s * y).abs())
                .fold(0.0, f64::max);
            assert!(resid <= 1e-9 * (1.0 + s1), "A v_{i} != s u_{i}: {resid}");
        }
        assert!(orthonormality_defect(&dec.left_vectors) < 1e-10);
        assert!(orthonormality_defect(&dec.right_vectors) < 1e-10);
        assert!(dec.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!(dec.singular_values.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn diagonal() {
        let a = DenseMatrix::diag(2, 2, &[3.0, 1.0]);
        let dec = svd(&a).unwrap();
        assert_eq!(dec.singular_values, vec![3.0, 1.0]);
        assert!(dec.left_vectors.max_abs_diff(&DenseMatrix::identity(2)) < 1e-15);
        assert!(dec.right_vectors.max_abs_diff(&DenseMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn zero_matrix() {
        let a = DenseMatrix::zeros(3, 2);
        let dec = svd(&a).unwrap();
        assert_eq!(dec.singular_values, vec![0.0, 0.0]);
        check_contract(&a, &dec);
    }

    #[test]
    fn rank_one_outer_product() {
        // ‖u‖ = 2, ‖v‖ = 3.
        let u = [2.0, 0.0, 0.0, 0.0];
        let v = [1.0, 2.0, 2.0];
        let a = DenseMatrix::outer(&u, &v);
        let dec = svd(&a).unwrap();
        assert!((dec.singular_values[0] - 6.0).abs() < 1e-12);
        assert!(dec.singular_values[1..].iter().all(|s| s.abs() < 1e-12));
        check_contract(&a, &dec);
    }

    #[test]
    fn wide_and_tall_agree() {
        let a = DenseMatrix::from_fn(3, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5);
        let wide = svd(&a).unwrap();
        let tall = svd(&a.transpose()).unwrap();
        check_contract(&a, &wide);
        for (x, y) in wide.singular_values.iter().zip(&tall.singular_values) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(wide.reconstruct().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn rejects_nonfinite() {
        let mut a = DenseMatrix::zeros(2, 2);
        a.as_mut_slice()[0] = f64::INFINITY;
        assert!(matches!(svd(&a), Err(Error::NonFinite)));
    }
}
