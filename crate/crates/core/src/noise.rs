//! Seeded Gaussian noise and spectral norm statistics.
//!
//! Replicate `i` of a model draws from the ChaCha20 stream
//! `(master_seed, i)`: the key comes from `seed_from_u64(master_seed)` and
//! the 64-bit stream id is `i`, so every replicate is reproducible on its
//! own and independent of scheduling. Standard normals use the Marsaglia
//! polar method on 53-bit uniforms and are then multiplied by `τ`, which
//! makes the output exactly equivariant under power-of-two changes of `τ`.

use std::collections::BTreeMap;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{operator_norm, DenseMatrix};
use crate::stats;

/// Streams at or above this id are reserved for auxiliary draws (factors,
/// probe vectors, regime estimates) and never collide with replicates.
pub const AUX_STREAM_BASE: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub m: usize,
    pub n: usize,
    pub tau: f64,
    pub master_seed: u64,
}

impl NoiseModel {
    /// `τ = 0` is accepted and yields the zero matrix.
    pub fn new(m: usize, n: usize, tau: f64, master_seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidConfig(
                "noise dimensions must be positive".into(),
            ));
        }
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tau must be finite and non-negative, got {tau}"
            )));
        }
        Ok(Self {
            m,
            n,
            tau,
            master_seed,
        })
    }
}

/// Standard normal generator over one ChaCha20 stream.
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on `[-1, 1)` with 53 random bits.
    fn symmetric_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 52) as f64) - 1.0
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = self.symmetric_uniform();
            let v = self.symmetric_uniform();
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn fill_standard(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_standard();
        }
    }

    pub fn standard_vector(&mut self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        self.fill_standard(&mut v);
        v
    }
}

/// The `m×n` noise matrix of replicate `replicate_index`.
pub fn sample_noise(model: &NoiseModel, replicate_index: u64) -> DenseMatrix {
    let mut g = GaussianStream::new(model.master_seed, replicate_index);
    let mut x = DenseMatrix::zeros(model.m, model.n);
    let tau = model.tau;
    for v in x.as_mut_slice() {
        *v = tau * g.next_standard();
    }
    x
}

/// `δ(t) = mean + c₂·τ·√t`.
pub fn deviation_threshold(mean_norm_estimate: f64, tau: f64, t: f64, c2: f64) -> f64 {
    mean_norm_estimate + c2 * tau * t.max(0.0).sqrt()
}

/// Probability levels reported in [`NormStats::quantiles`].
pub const NORM_QUANTILE_LEVELS: [f64; 9] = [0.0, 0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormStats {
    pub m: usize,
    pub n: usize,
    pub tau: f64,
    pub seed: u64,
    pub replicates: usize,
    pub mean_norm: f64,
    pub std_norm: f64,
    /// `mean_norm / (τ √(m∨n))`.
    pub normalized_mean: f64,
    /// Keyed by probability level, e.g. `"0.5"`.
    pub quantiles: BTreeMap<String, f64>,
}

impl NormStats {
    pub fn from_samples(model: &NoiseModel, samples: &[f64]) -> Self {
        let sorted = stats::sorted(samples);
        let quantiles = NORM_QUANTILE_LEVELS
            .iter()
            .map(|&p| (format!("{p}"), stats::quantile_sorted(&sorted, p)))
            .collect();
        let mean_norm = stats::mean(samples);
        Self {
            m: model.m,
            n: model.n,
            tau: model.tau,
            seed: model.master_seed,
            replicates: samples.len(),
            mean_norm,
            std_norm: stats::sample_std(samples),
            normalized_mean: mean_norm / (model.tau * (model.m.max(model.n) as f64).sqrt()),
            quantiles,
        }
    }

    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles.get(&format!("{p}")).copied()
    }
}

/// `‖X_i‖` for replicates `0..replicates`, in index order.
pub fn norm_samples(model: &NoiseModel, replicates: usize) -> Result<Vec<f64>> {
    (0..replicates as u64)
        .into_par_iter()
        .map(|i| operator_norm(&sample_noise(model, i)))
        .collect()
}

pub fn norm_stats(model: &NoiseModel, replicates: usize) -> Result<NormStats> {
    if replicates < 30 {
        return Err(Error::InsufficientReplicates {
            got: replicates,
            need: 30,
        });
    }
    Ok(NormStats::from_samples(
        model,
        &norm_samples(model, replicates)?,
    ))
}

/// `(mean ‖X‖ᵖ)^{1/p} / scale`.
pub fn moment_ratio(samples: &[f64], p: f64, scale: f64) -> f64 {
    let m: f64 = samples.iter().map(|x| x.powf(p)).sum::<f64>() / samples.len() as f64;
    m.powf(1.0 / p) / scale
}

/// Fraction of samples farther than `radius` from their mean.
pub fn deviation_fraction(samples: &[f64], radius: f64) -> f64 {
    let mu = stats::mean(samples);
    samples.iter().filter(|x| (*x - mu).abs() > radius).count() as f64 / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_streams_are_reproducible_and_distinct() {
        let model = NoiseModel::new(3, 4, 1.0, 7).unwrap();
        assert_eq!(sample_noise(&model, 5), sample_noise(&model, 5));
        assert_ne!(sample_noise(&model, 5), sample_noise(&model, 6));
    }

    #[test]
    fn scale_equivariance_is_exact() {
        let one = NoiseModel::new(5, 5, 1.0, 11).unwrap();
        let two = NoiseModel { tau: 2.0, ..one };
        assert_eq!(sample_noise(&two, 3), sample_noise(&one, 3).scaled(2.0));
    }

    #[test]
    fn zero_tau_gives_zero_matrix() {
        let model = NoiseModel::new(2, 2, 0.0, 1).unwrap();
        assert_eq!(sample_noise(&model, 0).max_abs(), 0.0);
        assert!(NoiseModel::new(2, 2, -1.0, 1).is_err());
        assert!(NoiseModel::new(0, 2, 1.0, 1).is_err());
    }

    #[test]
    fn threshold_arithmetic() {
        assert_eq!(deviation_threshold(10.0, 1.0, 0.0, 1.0), 10.0);
        assert_eq!(deviation_threshold(10.0, 1.0, 4.0, 0.0), 10.0);
        assert_eq!(deviation_threshold(10.0, 1.0, 4.0, 1.0), 12.0);
    }

    #[test]
    fn stats_reject_few_replicates() {
        let model = NoiseModel::new(2, 2, 1.0, 1).unwrap();
        assert!(matches!(
            norm_stats(&model, 10),
            Err(Error::InsufficientReplicates { .. })
        ));
    }

    #[test]
    fn stats_json_shape() {
        let model = NoiseModel::new(6, 4, 1.0, 3).unwrap();
        let s = norm_stats(&model, 40).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        for k in [
            "m",
            "n",
            "tau",
            "seed",
            "replicates",
            "mean_norm",
            "std_norm",
            "normalized_mean",
            "quantiles",
        ] {
            assert!(keys.contains(&k), "missing {k}");
        }
        assert!(s.quantile(0.0).unwrap() <= s.mean_norm && s.mean_norm <= s.quantile(1.0).unwrap());
    }
}
