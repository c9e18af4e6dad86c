use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::output::{write_json, write_records};
use super::replicate::{run_replicates, RecordSchema, RunOutput};
use super::signal::{build_probes, build_signal, RegimeCheck};
use super::summary::{
    mean_projector, projector_bias, summarize, SummaryReport, SweepReport, MIN_RECORDS,
};
use crate::error::Result;
use crate::linalg::io::write_matrix_csv;
use crate::linalg::DenseMatrix;

/// Largest `m + n` for which the mean projector is written to disk.
pub const MEAN_PROJECTOR_FILE_LIMIT: usize = 1000;

/// One single-size run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ExperimentConfig,
    pub regime: RegimeCheck,
    pub schema: RecordSchema,
    pub run: RunOutput,
    pub mean_projector: DenseMatrix,
    /// Absent when fewer than [`MIN_RECORDS`] replicates were run.
    pub summary: Option<SummaryReport>,
}

pub fn simulate(config: &ExperimentConfig) -> Result<Simulation> {
    config.validate()?;
    let signal = build_signal(config)?;
    let probes = build_probes(config)?;
    let k = config.cluster_index;
    let simple = signal.clustering.multiplicity(k) == 1;
    let schema = RecordSchema::new(&probes, simple);
    let run = run_replicates(config, &signal, &probes)?;
    let dim = config.m + config.n;
    let mean = mean_projector(&run.thetas, dim)?;
    let summary = if run.records.len() >= MIN_RECORDS {
        let mut s = summarize(&run.records, &schema, config)?;
        s.regime = Some(signal.regime);
        let cl = signal.projectors.cluster(k)?;
        let leakage: Vec<f64> = run.records.iter().map(|r| r.leakage_sq).collect();
        s.projector_bias = Some(projector_bias(
            &mean,
            &cl.thetas,
            &leakage,
            config.tau,
            cl.gap,
            config.max_dim(),
        )?);
        Some(s)
    } else {
        None
    };
    Ok(Simulation {
        config: config.clone(),
        regime: signal.regime,
        schema,
        run,
        mean_projector: mean,
        summary,
    })
}

impl Simulation {
    /// Writes `records.csv`, `summary.json` and, for small dimensions,
    /// `mean_projector.csv` into `dir`. Returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let records = dir.join("records.csv");
        write_records(&records, &self.run.records, &self.schema, &self.config)?;
        written.push(records);
        if let Some(s) = &self.summary {
            let path = dir.join("summary.json");
            write_json(&path, s)?;
            written.push(path);
        }
        if self.config.m + self.config.n <= MEAN_PROJECTOR_FILE_LIMIT {
            let path = dir.join("mean_projector.csv");
            write_matrix_csv(&path, &self.mean_projector)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs every size of `config.size_sweep`, writing each into
/// `<dir>/<m>x<n>/` when `dir` is given, and fits the scaling slopes.
pub fn simulate_sweep(config: &ExperimentConfig, dir: Option<&Path>) -> Result<SweepReport> {
    config.validate()?;
    let points = config.size_sweep.clone().unwrap_or_default();
    let mut reports = Vec::with_capacity(points.len());
    for p in points {
        let cfg = config.at_size(p);
        let sim = simulate(&cfg)?;
        if let Some(dir) = dir {
            sim.write(&dir.join(format!("{}x{}", cfg.m, cfg.n)))?;
        }
        if let Some(s) = sim.summary {
            reports.push(s);
        }
    }
    let report = SweepReport::new(config, reports);
    if let Some(dir) = dir {
        write_json(&dir.join("sweep.json"), &report)?;
    }
    Ok(report)
}
