//! Symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration (the EISPACK `tred2`/`tql2` pair). Work arrays are kept
//! column-major so the inner loops of both phases run over contiguous
//! memory.

use super::matrix::{normalize_sign, DenseMatrix};
use crate::error::{Error, Result};

/// Relative tolerance on `|S_ij − S_ji|` accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the unit eigenvector for `eigenvalues[j]`.
    pub eigenvectors: DenseMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.eigenvectors.col(j)
    }

    /// `Q diag(λ) Qᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.dim();
        let mut out = DenseMatrix::zeros(n, n);
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let q = self.vector(j);
            out.rank_one_update(lambda, &q, &q);
        }
        out
    }
}

fn check_symmetric(s: &DenseMatrix) -> Result<()> {
    if !s.all_finite() {
        return Err(Error::NonFinite);
    }
    if !s.is_square() {
        return Err(Error::dims(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.rows(),
            s.cols()
        )));
    }
    let asymmetry = s.asymmetry();
    if asymmetry > SYMMETRY_TOL * s.max_abs() {
        return Err(Error::NonSymmetric { asymmetry });
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix. Eigenvalues come out
/// non-increasing; each eigenvector has its first significant component
/// made non-negative so the output is deterministic.
pub fn sym_eig(s: &DenseMatrix) -> Result<EigenDecomposition> {
    check_symmetric(s)?;
    let n = s.rows();
    let mut work = Tridiagonal::reduce(s, true);
    work.ql(true)?;

    let order = descending_order(&work.d);
    let eigenvalues: Vec<f64> = order.iter().map(|&i| work.d[i]).collect();
    let mut eigenvectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut q = work.v[src * n..(src + 1) * n].to_vec();
        normalize_sign(&mut q);
        eigenvectors.set_col(dst, &q);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, non-increasing. Skips the O(n³) accumulation of the
/// Householder reflectors.
pub fn sym_eigvals(s: &DenseMatrix) -> Result<Vec<f64>> {
    check_symmetric(s)?;
    let mut work = Tridiagonal::reduce(s, false);
    work.ql(false)?;
    let order = descending_order(&work.d);
    Ok(order.iter().map(|&i| work.d[i]).collect())
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Stable: ties keep ascending index order.
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

struct Tridiagonal {
    n: usize,
    /// Column-major n×n; holds the accumulated orthogonal transform.
    v: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
}

impl Tridiagonal {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.v[c * self.n + r]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.v[c * self.n + r]
    }

    #[allow(clippy::needless_range_loop)]
    fn reduce(s: &DenseMatrix, accumulate: bool) -> Self {
        let n = s.rows();
        // Symmetric input, so the row-major buffer read as column-major is
        // the same matrix; average to remove tolerated asymmetry.
        let mut v = vec![0.0; n * n];
        for c in 0..n {
            for r in 0..n {
                v[c * n + r] = 0.5 * (s.get(r, c) + s.get(c, r));
            }
        }
        let mut t = Self {
            n,
            v,
            d: vec![0.0; n],
            e: vec![0.0; n],
        };
        if n == 0 {
            return t;
        }
        for j in 0..n {
            t.d[j] = t.at(n - 1, j);
        }

        for i in (1..n).rev() {
            let mut h = 0.0;
            let scale: f64 = t.d[..i].iter().map(|x| x.abs()).sum();
            if scale == 0.0 {
                t.e[i] = t.d[i - 1];
                for j in 0..i {
                    t.d[j] = t.at(i - 1, j);
                    *t.at_mut(i, j) = 0.0;
                    *t.at_mut(j, i) = 0.0;
                }
            } else {
                for k in 0..i {
                    t.d[k] /= scale;
                    h += t.d[k] * t.d[k];
                }
                let mut f = t.d[i - 1];
                let mut g = h.sqrt();
                if f > 0.0 {
                    g = -g;
                }
                t.e[i] = scale * g;
                h -= f * g;
                t.d[i - 1] = f - g;
                t.e[..i].iter_mut().for_each(|x| *x = 0.0);

                for j in 0..i {
                    f = t.d[j];
                    *t.at_mut(j, i) = f;
                    g = t.e[j] + t.at(j, j) * f;
                    let col = &t.v[j * n..j * n + i];
                    for k in (j + 1)..i {
                        g += col[k] * t.d[k];
                        t.e[k] += col[k] * f;
                    }
                    t.e[j] = g;
                }
                f = 0.0;
                for j in 0..i {
                    t.e[j] /= h;
                    f += t.e[j] * t.d[j];
                }
                let hh = f / (h + h);
                for j in 0..i {
                    t.e[j] -= hh * t.d[j];
                }
                for j in 0..i {
                    f = t.d[j];
                    g = t.e[j];
                    let col = &mut t.v[j * n..j * n + i];
                    for k in j..i {
                        col[k] -= f * t.e[k] + g * t.d[k];
                    }
                    t.d[j] = t.at(i - 1, j);
                    *t.at_mut(i, j) = 0.0;
                }
            }
            t.d[i] = h;
        }

        if accumulate {
            for i in 0..n - 1 {
                let diag = t.at(i, i);
                *t.at_mut(n - 1, i) = diag;
                *t.at_mut(i, i) = 1.0;
                let h = t.d[i + 1];
                if h != 0.0 {
                    for k in 0..=i {
                        t.d[k] = t.at(k, i + 1) / h;
                    }
                    for j in 0..=i {
                        let mut g = 0.0;
                        for k in 0..=i {
                            g += t.at(k, i + 1) * t.at(k, j);
                        }
                        for k in 0..=i {
                            let dk = t.d[k];
                            *t.at_mut(k, j) -= g * dk;
                        }
                    }
                }
                for k in 0..=i {
                    *t.at_mut(k, i + 1) = 0.0;
                }
            }
            for j in 0..n {
                t.d[j] = t.at(n - 1, j);
                *t.at_mut(n - 1, j) = 0.0;
            }
            *t.at_mut(n - 1, n - 1) = 1.0;
        } else {
            for j in 0..n {
                t.d[j] = t.at(j, j);
            }
        }
        t.e[0] = 0.0;
        t
    }

    fn ql(&mut self, vectors: bool) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Ok(());
        }
        for i in 1..n {
            self.e[i - 1] = self.e[i];
        }
        self.e[n - 1] = 0.0;

        let eps = f64::EPSILON;
        let max_iter = 60 * n.max(1);
        let mut f = 0.0;
        let mut tst1 = 0.0f64;
        let (d, e) = (&mut self.d, &mut self.e);
        for l in 0..n {
            tst1 = tst1.max(d[l].abs() + e[l].abs());
            let mut m = l;
            while m < n - 1 && e[m].abs() > eps * tst1 {
                m += 1;
            }
            if m > l {
                let mut iter = 0;
                loop {
                    iter += 1;
                    if iter > max_iter {
                        return Err(Error::NoConvergence(format!(
                            "implicit QL stalled at index {l}"
                        )));
                    }
                    let mut g = d[l];
                    let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                    let mut r = p.hypot(1.0);
                    if p < 0.0 {
                        r = -r;
                    }
                    d[l] = e[l] / (p + r);
                    d[l + 1] = e[l] * (p + r);
                    let dl1 = d[l + 1];
                    let mut h = g - d[l];
                    for di in d.iter_mut().skip(l + 2) {
                        *di -= h;
                    }
                    f += h;

                    p = d[m];
                    let mut c = 1.0;
                    let mut c2 = c;
                    let mut c3 = c;
                    let el1 = e[l + 1];
                    let mut s = 0.0;
                    let mut s2 = 0.0;
                    for i in (l..m).rev() {
                        c3 = c2;
                        c2 = c;
                        s2 = s;
                        g = c * e[i];
                        h = c * p;
                        r = p.hypot(e[i]);
                        e[i + 1] = s * r;
                        s = e[i] / r;
                        c = p / r;
                        p = c * d[i] - s * g;
                        d[i + 1] = h + s * (c * g + s * d[i]);
                        if vectors {
                            let (left, right) = self.v.split_at_mut((i + 1) * n);
                            let vi = &mut left[i * n..];
                            let vi1 = &mut right[..n];
                            for k in 0..n {
                                let hk = vi1[k];
                                vi1[k] = s * vi[k] + c * hk;
                                vi[k] = c * vi[k] - s * hk;
                            }
                        }
                    }
                    p = -s * s2 * c3 * el1 * e[l] / dl1;
                    e[l] = s * p;
                    d[l] = c * p;
                    if e[l].abs() <= eps * tst1 {
                        break;
                    }
                }
            }
            d[l] += f;
            e[l] = 0.0;
        }
        Ok(())
    }
}
