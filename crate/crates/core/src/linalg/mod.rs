//! Dense matrix primitives, symmetric eigendecomposition and SVD.

mod eigen;
pub mod io;
mod lanczos;
mod lowrank;
mod lu;
mod matrix;
mod norms;
mod svd;

pub use eigen::{sym_eig, sym_eigvals, EigenDecomposition, SYMMETRY_TOL};
pub use lanczos::{
    leading_singular_triplets, top_singular_value, LinearOperator, SingularTriplets,
};
pub use lowrank::{orthonormal_basis, sym_norm_on_span};
pub use lu::{norm_one, LuFactorization};
pub use matrix::{axpy, dot, norm2, norm_inf, normalize_sign, DenseMatrix};
pub use norms::{operator_norm, orthonormality_defect, sym_spectral_radius};
pub use svd::{svd, SvdDecomposition};

pub(crate) use svd::complete_basis;
