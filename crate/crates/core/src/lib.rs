pub mod dilation;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod linalg;
pub mod noise;
pub mod perturbation;
pub mod stats;

pub use error::{Error, Result};
