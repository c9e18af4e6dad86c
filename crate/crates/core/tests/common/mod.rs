#![allow(dead_code)]

use svperturb::linalg::{svd, DenseMatrix};
use svperturb::noise::GaussianStream;

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut g = GaussianStream::new(seed, 0);
    DenseMatrix::new(rows, cols, g.standard_vector(rows * cols)).unwrap()
}

pub fn symmetric(n: usize, seed: u64) -> DenseMatrix {
    gaussian(n, n, seed).symmetrized()
}

/// `rows × cols` with orthonormal columns.
pub fn orthonormal(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    svd(&gaussian(rows, cols, seed)).unwrap().left_vectors
}

/// `U diag(spectrum) Vᵀ` with random orthonormal `U`, `V`.
pub fn with_spectrum(m: usize, n: usize, spectrum: &[f64], seed: u64) -> DenseMatrix {
    let r = spectrum.len();
    let u = orthonormal(m, r, seed);
    let v = orthonormal(n, r, seed.wrapping_add(1));
    let mut a = DenseMatrix::zeros(m, n);
    for (i, &s) in spectrum.iter().enumerate() {
        a.rank_one_update(s, &u.col(i), &v.col(i));
    }
    a
}

pub fn assert_close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) {
    assert_eq!(a.shape(), b.shape());
    let d = a.max_abs_diff(b);
    assert!(d <= tol, "max difference {d:e} exceeds {tol:e}");
}
