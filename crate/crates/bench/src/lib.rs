//! Benchmark and verification harness for `steplsm`.
//!
//! [`workload`] generates deterministic operation streams, [`runner`]
//! drives a store through them (optionally checking every read against the
//! reference model) and [`report`] turns the results into CSV or JSON.

pub mod report;
pub mod runner;
pub mod workload;

pub use report::{emit, Format, MetricsReport, Percentiles};
pub use runner::{policy_presets, policy_table, run, run_on, sweep, RunOptions};
pub use workload::{generate, key_for, Distribution, Op, OpStream, WorkloadSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid workload: {0}")]
    InvalidSpec(String),
    #[error("verification mismatch at op {op_index}: {detail}")]
    Mismatch { op_index: u64, detail: String },
    #[error(transparent)]
    Store(#[from] steplsm::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
