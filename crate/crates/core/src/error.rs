use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("non-finite entry encountered")]
    NonFinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("vector is not unit norm (norm {norm})")]
    NonUnit { norm: f64 },

    #[error("spectrum is empty: all singular values are zero")]
    EmptySpectrum,

    #[error("index {index} out of range (valid 1..={max})")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("eigenvalue on or near the contour (condition number {condition:e})")]
    EigenvalueOnContour { condition: f64 },

    #[error("cluster {cluster} has multiplicity {multiplicity}, expected 1")]
    MultiplicityNotOne { cluster: usize, multiplicity: usize },

    #[error("insufficient replicates: got {got}, need at least {need}")]
    InsufficientReplicates { got: usize, need: usize },

    #[error("degenerate fit: all abscissae identical")]
    DegenerateFit,

    #[error("spectrum of length {len} does not fit a {m}x{n} matrix")]
    SpectrumTooLong { len: usize, m: usize, n: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error comes from malformed or inconsistent input rather
    /// than from the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::IndexOutOfRange { .. }
                | Error::InsufficientReplicates { .. }
                | Error::SpectrumTooLong { .. }
                | Error::InvalidConfig(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
