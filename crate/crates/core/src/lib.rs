//! Deterministic simulator of an SIS economic-epidemic game with contact
//! tracing and quarantine, plus the agent policies, Monte Carlo harness and
//! test statistics used to study it.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] is the per-group round state machine.
//! * [`policy`] maps what an agent can observe to decisions (rational,
//!   regression-calibrated, scripted).
//! * [`harness`] samples endowments, assembles groups and runs batches.
//! * [`stats`] holds the Mann-Whitney / Welch kernels and power estimation.
//! * [`report`] turns round traces into per-round series and charts.
//!
//! With the `parallel` feature (on by default) batches fan out over rayon;
//! without it the same cells run sequentially and produce identical output.

pub mod config;
pub mod harness;
pub mod model;
pub mod policy;
pub mod report;
pub mod rng;
pub mod stats;
pub mod treatment;

pub use config::{ConfigError, GameConfig, GameMode};
pub use model::{AgentState, Decision, GroupState, Health, ModelError, PendingRound, RoundRecord};
pub use treatment::Treatment;
