use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dilation::DEFAULT_CLUSTER_TOL;
use crate::error::{Error, Result};
use crate::estimator::DEFAULT_GAMMA;
use crate::perturbation::Solver;

/// How the singular vectors of the signal are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factors {
    /// `u_i = e_i`, `v_i = e_i`.
    Identity,
    /// Seeded Haar-like orthonormal columns.
    #[default]
    Random,
}

/// `"canonical"` or a count of seeded random unit pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbeSpec {
    Random(usize),
    Named(ProbeKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeKind {
    Canonical,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec::Named(ProbeKind::Canonical)
    }
}

/// One size of a sweep: dimensions and the factor applied to `spectrum`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizePoint(pub usize, pub usize, pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub tau: f64,
    pub spectrum: Vec<f64>,
    #[serde(default)]
    pub factors: Factors,
    #[serde(default = "one")]
    pub cluster_index: usize,
    pub replicates: usize,
    pub master_seed: u64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_t_values")]
    pub t_values: Vec<f64>,
    #[serde(default)]
    pub probe_vectors: ProbeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_sweep: Option<Vec<SizePoint>>,
    #[serde(default = "default_cluster_tol")]
    pub cluster_tol: f64,
    #[serde(default = "one_f64")]
    pub c2: f64,
    #[serde(default)]
    pub solver: Solver,
    /// Known `b_k` used for the ℓ∞ and `ρ` columns; estimated from the run
    /// itself when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_reference: Option<f64>,
}

fn one() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

fn default_t_values() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}

fn default_cluster_tol() -> f64 {
    DEFAULT_CLUSTER_TOL
}

impl ExperimentConfig {
    /// A config with defaults for every optional field.
    pub fn new(
        m: usize,
        n: usize,
        tau: f64,
        spectrum: Vec<f64>,
        replicates: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            m,
            n,
            tau,
            spectrum,
            factors: Factors::default(),
            cluster_index: 1,
            replicates,
            master_seed,
            gamma: DEFAULT_GAMMA,
            t_values: default_t_values(),
            probe_vectors: ProbeSpec::default(),
            size_sweep: None,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            c2: 1.0,
            solver: Solver::Auto,
            bias_reference: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.n == 0 {
            return bad("m and n must be positive".into());
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad(format!(
                "tau must be finite and non-negative, got {}",
                self.tau
            ));
        }
        if self.spectrum.is_empty() {
            return bad("spectrum must not be empty".into());
        }
        if self.spectrum.len() > self.m.min(self.n) {
            return Err(Error::SpectrumTooLong {
                len: self.spectrum.len(),
                m: self.m,
                n: self.n,
            });
        }
        if self.spectrum.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return bad("spectrum entries must be positive".into());
        }
        if self.spectrum.windows(2).any(|w| w[1] > w[0]) {
            return bad("spectrum must be non-increasing".into());
        }
        if self.replicates < 2 {
            return bad("replicates must be at least 2".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.t_values.iter().any(|t| t.is_nan() || *t < 1.0) {
            return bad("t_values must all be >= 1".into());
        }
        if self.cluster_index == 0 {
            return bad("cluster_index is 1-based".into());
        }
        if self.cluster_tol.is_nan() || self.cluster_tol < 0.0 {
            return bad("cluster_tol must be non-negative".into());
        }
        if let Some(b) = self.bias_reference {
            if !(-1.0..=0.0).contains(&b) {
                return bad(format!("bias_reference must lie in [-1, 0], got {b}"));
            }
        }
        if let Some(sweep) = &self.size_sweep {
            if sweep.is_empty() {
                return bad("size_sweep must not be empty when present".into());
            }
            for p in sweep {
                if p.0 == 0 || p.1 == 0 || p.2.is_nan() || p.2 <= 0.0 {
                    return bad(format!("invalid sweep point {p:?}"));
                }
                if self.spectrum.len() > p.0.min(p.1) {
                    return Err(Error::SpectrumTooLong {
                        len: self.spectrum.len(),
                        m: p.0,
                        n: p.1,
                    });
                }
            }
        }
        Ok(())
    }

    /// The single-size config of one sweep point.
    pub fn at_size(&self, point: SizePoint) -> Self {
        Self {
            m: point.0,
            n: point.1,
            spectrum: self.spectrum.iter().map(|s| s * point.2).collect(),
            size_sweep: None,
            ..self.clone()
        }
    }

    pub fn max_dim(&self) -> usize {
        self.m.max(self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"m":4,"n":3,"tau":0.1,"spectrum":[2.0,1.0],"replicates":10,"master_seed":5}"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.cluster_index, 1);
        assert_eq!(c.gamma, 0.25);
        assert_eq!(c.t_values, vec![1.0, 2.0, 4.0]);
        assert_eq!(c.probe_vectors, ProbeSpec::Named(ProbeKind::Canonical));
        assert_eq!(c.factors, Factors::Random);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("}", r#","extra":1}"#);
        assert!(matches!(
            ExperimentConfig::from_json(&text),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn probe_and_sweep_forms() {
        let text = MINIMAL.replace(
            "}",
            r#","probe_vectors":7,"size_sweep":[[10,10,1.0],[20,20,1.5]],"factors":"identity"}"#,
        );
        let c = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(c.probe_vectors, ProbeSpec::Random(7));
        let s = c.at_size(c.size_sweep.as_ref().unwrap()[1]);
        assert_eq!((s.m, s.n), (20, 20));
        assert_eq!(s.spectrum, vec![3.0, 1.5]);
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_values() {
        for (from, to) in [
            (r#""replicates":10"#, r#""replicates":1"#),
            (r#""spectrum":[2.0,1.0]"#, r#""spectrum":[1.0,2.0]"#),
            (r#""spectrum":[2.0,1.0]"#, r#""spectrum":[3.0,2.0,1.0,0.5]"#),
            (r#""tau":0.1"#, r#""tau":-1"#),
        ] {
            assert!(
                ExperimentConfig::from_json(&MINIMAL.replace(from, to)).is_err(),
                "{to}"
            );
        }
        let bad_t = MINIMAL.replace("}", r#","t_values":[0.5]}"#);
        assert!(ExperimentConfig::from_json(&bad_t).is_err());
    }
}
