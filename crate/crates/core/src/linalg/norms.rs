use super::eigen::{sym_eigvals, SYMMETRY_TOL};
use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// Largest singular value.
///
/// Symmetric input goes through the eigenvalues directly; anything else
/// through the Gram matrix of the shorter side, whose top eigenvalue carries
/// `σ₁²` to full relative precision.
pub fn operator_norm(a: &DenseMatrix) -> Result<f64> {
    if !a.all_finite() {
        return Err(Error::NonFinite);
    }
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    if a.is_square() && a.asymmetry() <= SYMMETRY_TOL * a.max_abs() {
        return sym_spectral_radius(a);
    }
    let gram = if a.rows() <= a.cols() {
        gram_rows(a)
    } else {
        gram_rows(&a.transpose())
    };
    let top = sym_eigvals(&gram)?.first().copied().unwrap_or(0.0);
    Ok(top.max(0.0).sqrt())
}

/// `max |λ|` of a symmetric matrix.
pub fn sym_spectral_radius(s: &DenseMatrix) -> Result<f64> {
    let vals = sym_eigvals(s)?;
    Ok(vals.iter().fold(0.0, |m: f64, x| m.max(x.abs())))
}

/// `A Aᵀ` for a row-major matrix, exploiting symmetry.
fn gram_rows(a: &DenseMatrix) -> DenseMatrix {
    let r = a.rows();
    let mut g = DenseMatrix::zeros(r, r);
    for i in 0..r {
        for j in 0..=i {
            let v = super::matrix::dot(a.row(i), a.row(j));
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    g
}

/// `‖QᵀQ − I‖_max`.
pub fn orthonormality_defect(q: &DenseMatrix) -> f64 {
    let cols = q.columns();
    let mut worst = 0.0f64;
    for i in 0..cols.len() {
        for j in 0..=i {
            let g = super::matrix::dot(&cols[i], &cols[j]);
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_swap() {
        assert_eq!(
            operator_norm(&DenseMatrix::diag(2, 2, &[3.0, 1.0])).unwrap(),
            3.0
        );
        let swap = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((operator_norm(&swap).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rectangular_uses_gram() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 2.0, 0.0]]).unwrap();
        assert!((operator_norm(&a).unwrap() - 2.0).abs() < 1e-15);
        assert!((operator_norm(&a.transpose()).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn defect_examples() {
        assert_eq!(orthonormality_defect(&DenseMatrix::identity(3)), 0.0);
        let col = DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        assert_eq!(orthonormality_defect(&col), 0.0);
        let dup = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(orthonormality_defect(&dup), 1.0);
    }

    #[test]
    fn nonfinite_rejected() {
        let a = DenseMatrix::from_fn(2, 2, |_, _| 1.0);
        let mut b = a.clone();
        b.as_mut_slice()[3] = f64::NAN;
        assert!(operator_norm(&a).is_ok());
        assert!(matches!(operator_norm(&b), Err(Error::NonFinite)));
    }
}
