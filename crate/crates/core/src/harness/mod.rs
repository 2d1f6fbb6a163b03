//! Endowment sampling, group assembly and batch Monte Carlo runs.

mod batch;
mod endowments;
mod summary;

pub use batch::{
    run_batch, run_batch_on, run_batch_sequential, run_group, BatchOutput, BatchSpec, GroupRun,
    PolicySpec,
};
pub use endowments::{sample_endowments, BlockLabel, EndowmentParams, Endowments, IdeologyBlock};
pub use summary::{
    calibration_moments, summarize, CalibrationMoments, GroupSummary, Metric, MetricMoments,
    SummaryRow, TreatmentMoments,
};

use crate::model::ModelError;
use crate::policy::{CoefficientError, SolverError};
use crate::treatment::Treatment;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid batch spec: {0}")]
    Spec(String),
    #[error("run {run}, group {group}, {treatment}, round {round}: {source}")]
    Engine {
        run: u64,
        group: u64,
        treatment: Treatment,
        round: u32,
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Coefficients(#[from] CoefficientError),
    #[error("no summaries to aggregate")]
    Empty,
}
