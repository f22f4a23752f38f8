//! Training, evaluation and the multi-partition protocol, plus the
//! finite-difference suites behind `qunet gradcheck`.

pub mod gradcheck;
mod metrics;
mod protocol;
mod stats;
mod train;

pub use metrics::{iou, mean_iou, IOU_THRESHOLD};
pub use protocol::{
    read_runs_csv, run_protocol, write_runs_csv, write_summary, ProtocolConfig, ProtocolOutcome, ProtocolSummary,
    RUNS_FILE, SUMMARY_FILE,
};
pub use stats::{aggregate_stats, quantile, SummaryStats};
pub use train::{evaluate, train, RunResult, TrainConfig};
