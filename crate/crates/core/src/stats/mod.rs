//! Test kernels and Monte Carlo power estimation.

mod mann_whitney;
mod power;
mod welch;

pub use mann_whitney::{exact_u_counts, mann_whitney_u, u_statistics, MwMode, EXACT_LIMIT};
pub use power::{
    diff_in_diff_test, estimate_power, estimate_power_by, DiffInDiff, PowerEstimate, PowerRow,
};
pub use welch::welch_t;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MwExact,
    MwNormalApprox,
    WelchT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    #[serde(rename = "p")]
    pub p_value: f64,
    pub method: Method,
    pub n1: usize,
    pub n2: usize,
    #[serde(rename = "ties")]
    pub ties_present: bool,
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains NaN or infinite values")]
    NotANumber,
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("missing cell: {0}")]
    MissingCell(String),
    #[error("unpaired data: {0}")]
    Unpaired(String),
    #[error("distribution: {0}")]
    Distribution(String),
}
