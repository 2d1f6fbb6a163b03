//! The per-group round state machine.
//!
//! A round runs in two halves so that interactive callers can collect
//! quarantine answers after alerts go out:
//!
//! 1. [`GroupState::begin_round`] records activity and tracing, spreads the
//!    disease and sends alerts, returning a [`PendingRound`].
//! 2. [`PendingRound::finish`] takes the quarantine answers of alerted agents,
//!    pays everyone and produces the next [`GroupState`] plus the
//!    [`RoundRecord`] of the finished round.
//!
//! [`step_round`] chains both halves for callers that decide everything up
//! front.

mod ops;
mod record;
mod state;

pub use ops::{
    compute_payoff, expected_exposures, expected_exposures_raw, outbreak_seed, round_half_away,
    select_exposed, send_alerts, should_continue, step_round,
};
pub use record::{AgentRoundRecord, RoundAggregates, RoundRecord, TraceRow, TraceWriter};
pub use state::{AgentState, Decision, GroupState, Health, Lagged, PendingRound};

use crate::config::ConfigError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("expected {expected} decisions, got {got}")]
    DecisionCount { expected: usize, got: usize },
    #[error("agent {agent}: {reason}")]
    IllegalDecision { agent: usize, reason: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("outbreak already started")]
    OutbreakStarted,
}
