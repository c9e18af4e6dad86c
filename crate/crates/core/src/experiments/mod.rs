//! Monte Carlo experiments: signal construction, per-replicate measurement,
//! summaries, file output and the verification suites.

pub mod config;
pub mod output;
pub mod replicate;
pub mod signal;
pub mod simulate;
pub mod suites;
pub mod summary;

pub use config::{ExperimentConfig, Factors, ProbeKind, ProbeSpec, SizePoint};
pub use output::{
    read_records, records_from_csv, records_to_csv, write_json, write_records, RecordsFile,
};
pub use replicate::{run_replicates, EstimatorFields, RecordSchema, ReplicateRecord, RunOutput};
pub use signal::{build_probes, build_signal, noise_norm, Probes, RegimeCheck, Signal};
pub use simulate::{simulate, simulate_sweep, Simulation};
pub use suites::{run_suite, Check, Suite, SuiteReport, VerifyConfig};
pub use summary::{
    mean_projector, projector_bias, scaling_fit, summarize, BiasSummary, ProjectorBias,
    SummaryReport, SweepReport, VERSION,
};
