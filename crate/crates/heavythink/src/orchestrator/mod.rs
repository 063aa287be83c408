//! End-to-end pipeline driver: configuration, resumable JSONL stores,
//! the benchmark run loop, RL-cache export, and the CLI.

pub mod cli;
pub mod config;
pub mod export;
pub mod run;
pub mod store;

pub use cli::cli_main;
pub use config::{
    BuiltProvider, ExecutorSpec, ProviderSpec, RunConfig, Seeds, SelectionSettings,
    ToolLoopSettings,
};
pub use export::{
    export_rl_caches, RlExportRecord, DEFAULT_RL_K_CHOICES, DEFAULT_RL_RANGE,
};
pub use run::{
    load_dataset, load_report, load_trajectories, run_benchmark, run_pipeline, FullReport,
    PipelineMode, RunMetadata, RunOutcome, SelectionProvenance,
};
pub use store::{RunRecord, StageMarker};

use thiserror::Error;

use crate::cache::CacheError;
use crate::deliberation::DeliberationError;
use crate::metrics::MetricsError;
use crate::provider::ProviderError;
use crate::selection::SelectionError;
use crate::trajectory::TrajectoryError;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset parse error at {path}:{line}: {message}")]
    DatasetParse { path: String, line: usize, message: String },
    #[error("dataset {0} has no queries")]
    EmptyDataset(String),
    #[error("store error: {0}")]
    Store(String),
    #[error("{stage} stage incomplete for query {query_id}; run the earlier stages first")]
    StageMissing { stage: &'static str, query_id: String },
    #[error("no queries produced evaluations; first error: {0}")]
    NoEvaluations(String),
    #[error("no queries eligible for export in the requested pass-rate range")]
    NoEligibleQueries,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Deliberation(#[from] DeliberationError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
}
