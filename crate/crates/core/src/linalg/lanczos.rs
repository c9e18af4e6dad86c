//! Leading singular triplets by Golub–Kahan–Lanczos bidiagonalization with
//! full reorthogonalization.
//!
//! Used where only a handful of top triplets are needed from a large
//! matrix, so each step costs two matrix–vector products instead of an
//! O(n³) dense factorization.

use super::matrix::{axpy, dot, norm2, normalize_sign, DenseMatrix};
use super::svd::svd;
use crate::error::{Error, Result};

/// Anything that can apply `A` and `Aᵀ`.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = A x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = Aᵀ y`
    fn apply_t(&self, y: &[f64], out: &mut [f64]);
}

impl LinearOperator for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }

    fn ncols(&self) -> usize {
        self.cols()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), x);
        }
    }

    fn apply_t(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, self.row(i), out);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SingularTriplets {
    pub values: Vec<f64>,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
    /// Bidiagonalization steps taken.
    pub steps: usize,
}

/// Top `count` singular triplets of `op`.
///
/// Stops once every requested Ritz triplet has residual
/// `‖Aᵀũ − σ̃ṽ‖ ≤ rel_tol · σ̃₁` (`Aṽ = σ̃ũ` holds exactly in the Krylov
/// basis), or when the Krylov space is exhausted.
pub fn leading_singular_triplets<A: LinearOperator + ?Sized>(
    op: &A,
    count: usize,
    start: &[f64],
    rel_tol: f64,
) -> Result<SingularTriplets> {
    let (m, n) = (op.nrows(), op.ncols());
    let full = m.min(n);
    if count == 0 || count > full {
        return Err(Error::IndexOutOfRange {
            index: count,
            max: full,
        });
    }
    if start.len() != n {
        return Err(Error::dims("start vector length must equal column count"));
    }
    let start_norm = norm2(start);
    if start_norm.is_nan() || start_norm <= 0.0 {
        return Err(Error::dims("start vector must be non-zero"));
    }

    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = vec![start.iter().map(|x| x / start_norm).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];

    loop {
        let j = alphas.len();
        op.apply(&vs[j], &mut u);
        if j > 0 {
            axpy(-betas[j - 1], &us[j - 1], &mut u);
        }
        reorthogonalize(&mut u, &us);
        let alpha = norm2(&u);
        let scale = alphas.first().copied().unwrap_or(alpha).max(alpha);
        if alpha <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            // A v_j lies in the span already built; the current Ritz
            // values are exact.
            break;
        }
        let uj: Vec<f64> = u.iter().map(|x| x / alpha).collect();
        us.push(uj);
        alphas.push(alpha);

        op.apply_t(&us[j], &mut v);
        axpy(-alpha, &vs[j], &mut v);
        reorthogonalize(&mut v, &vs);
        let beta = norm2(&v);
        betas.push(beta);

        let k = alphas.len();
        let exhausted = k == full || beta <= 1e-14 * alphas.iter().cloned().fold(0.0, f64::max);
        if k >= count && (exhausted || k.is_multiple_of(2) || k == count) {
            let ritz = ritz_pairs(&alphas, &betas[..k - 1])?;
            let sigma1 = ritz.singular_values[0].max(f64::MIN_POSITIVE);
            let converged = (0..count).all(|i| {
                let last = ritz.left_vectors.get(k - 1, i);
                (beta * last).abs() <= rel_tol * sigma1
            });
            if converged || exhausted {
                return Ok(assemble(&ritz, &us, &vs[..k], count, k));
            }
        }
        if alphas.len() >= full {
            break;
        }
        vs.push(v.iter().map(|x| x / beta).collect());
    }

    let k = alphas.len();
    if k < count {
        return Err(Error::NoConvergence(format!(
            "Krylov space of dimension {k} cannot hold {count} triplets"
        )));
    }
    let ritz = ritz_pairs(&alphas, &betas[..k - 1])?;
    Ok(assemble(&ritz, &us, &vs[..k], count, k))
}

/// Largest singular value by Lanczos, residual-controlled.
pub fn top_singular_value<A: LinearOperator + ?Sized>(
    op: &A,
    start: &[f64],
    rel_tol: f64,
) -> Result<f64> {
    Ok(leading_singular_triplets(op, 1, start, rel_tol)?.values[0])
}

fn reorthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, x);
            axpy(-c, b, x);
        }
    }
}

fn ritz_pairs(alphas: &[f64], supers: &[f64]) -> Result<super::svd::SvdDecomposition> {
    let k = alphas.len();
    let mut b = DenseMatrix::zeros(k, k);
    for i in 0..k {
        b.set(i, i, alphas[i]);
        if i + 1 < k {
            b.set(i, i + 1, supers[i]);
        }
    }
    svd(&b)
}

fn assemble(
    ritz: &super::svd::SvdDecomposition,
    us: &[Vec<f64>],
    vs: &[Vec<f64>],
    count: usize,
    k: usize,
) -> SingularTriplets {
    let m = us[0].len();
    let n = vs[0].len();
    let mut left = Vec::with_capacity(count);
    let mut right = Vec::with_capacity(count);
    for i in 0..count {
        let mut ui = vec![0.0; m];
        let mut vi = vec![0.0; n];
        for l in 0..k {
            axpy(ritz.left_vectors.get(l, i), &us[l], &mut ui);
            axpy(ritz.right_vectors.get(l, i), &vs[l], &mut vi);
        }
        let (nu, nv) = (norm2(&ui), norm2(&vi));
        ui.iter_mut().for_each(|x| *x /= nu);
        vi.iter_mut().for_each(|x| *x /= nv);
        if normalize_sign(&mut ui) {
            vi.iter_mut().for_each(|x| *x = -*x);
        }
        left.push(ui);
        right.push(vi);
    }
    SingularTriplets {
        values: ritz.singular_values[..count].to_vec(),
        left,
        right,
        steps: k,
    }
}
