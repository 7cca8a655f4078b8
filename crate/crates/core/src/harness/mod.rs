//! Training loop, convergence metrics, multi-seed experiments, and report
//! aggregation.

mod config;
mod experiment;
mod metrics;
mod report;
mod train;

pub use config::TrainConfig;
pub use experiment::{
    load_runs, multi_seed, report_from_dir, run_experiment, run_file_name, write_report, write_run, Progress,
    CONFIG_TXT, REPORT_JSON, RUNS_DIR, SUMMARY_CSV, TABLE_TXT,
};
pub use metrics::{epochs_to_threshold, peak_epoch, EpochRecord, RunMetrics, RunSettings, RunStatus, ThresholdHit};
pub use report::{aggregate, param_count_table, ExperimentReport, FailedRun, ModelSummary, Stats, ThresholdSummary};
pub use train::{evaluate, prepare_data, train, train_observed, train_single, PreparedData};

use thiserror::Error;

use crate::data::DataError;
use crate::nn::NnError;
use crate::zoo::ZooError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error("report: {0}")]
    Report(String),

    #[error("empty accuracy history")]
    EmptyHistory,

    #[error("multi-seed runs need at least 2 seeds, got {0}")]
    TooFewSeeds(usize),

    #[error("non-finite training loss")]
    Diverged,

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Model(#[from] ZooError),

    #[error(transparent)]
    Nn(#[from] NnError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
