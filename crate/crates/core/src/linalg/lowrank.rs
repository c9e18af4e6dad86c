//! Norms of symmetric operators whose range sits in a known small span.

use super::eigen::sym_eigvals;
use super::matrix::{axpy, dot, norm2, DenseMatrix};
use crate::error::Result;

/// Orthonormal basis of `span(vectors)` by twice-iterated modified
/// Gram–Schmidt. Directions whose residual falls below `1e-10` of their
/// original length are dropped.
pub fn orthonormal_basis(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let original = norm2(v);
        if original == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let nrm = norm2(&w);
        if nrm > 1e-10 * original {
            w.iter_mut().for_each(|x| *x /= nrm);
            basis.push(w);
        }
    }
    basis
}

/// Operator norm of a symmetric operator `S` given through its action,
/// assuming `range(S) ⊆ span(spanning)`. Then `S = Q (QᵀSQ) Qᵀ` and the
/// norm is the spectral radius of the small compressed matrix.
pub fn sym_norm_on_span(spanning: &[Vec<f64>], apply: impl Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
    let q = orthonormal_basis(spanning);
    let k = q.len();
    if k == 0 {
        return Ok(0.0);
    }
    let images: Vec<Vec<f64>> = q.iter().map(|x| apply(x)).collect();
    let small = DenseMatrix::from_fn(k, k, |i, j| dot(&q[i], &images[j])).symmetrized();
    let vals = sym_eigvals(&small)?;
    Ok(vals.iter().fold(0.0, |m: f64, x| m.max(x.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_two_difference_of_projectors() {
        // P̃ − P for two unit vectors at angle φ has norm sin φ.
        let phi: f64 = 0.3;
        let a = vec![1.0, 0.0, 0.0];
        let b = vec![phi.cos(), phi.sin(), 0.0];
        let norm = sym_norm_on_span(&[a.clone(), b.clone()], |x| {
            let mut out = vec![0.0; 3];
            axpy(dot(&b, x), &b, &mut out);
            axpy(-dot(&a, x), &a, &mut out);
            out
        })
        .unwrap();
        assert!((norm - phi.sin()).abs() < 1e-14);
    }

    #[test]
    fn dependent_vectors_are_dropped() {
        let basis = orthonormal_basis(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![0.0, 0.0]]);
        assert_eq!(basis.len(), 1);
    }
}
