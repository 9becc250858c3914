//! Experiment harness: config parsing, dataset synthesis and CSV ingestion,
//! metric emission and sweep orchestration around `d2p2-core`.

pub mod config;
pub mod data;
pub mod error;
pub mod runner;

pub use config::{DatasetSource, ExperimentSpec, ObjectiveKind, Sweep, SweepAxis};
pub use error::{HarnessError, Result};
pub use runner::{aggregate, execute, run, sweep_report, AggregateRow, MetricsRow, ReportRow, RunOutput, RunSummary};
