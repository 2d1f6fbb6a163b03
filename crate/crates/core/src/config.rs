use serde::{Deserialize, Serialize};

use crate::treatment::Treatment;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("group_size must be at least 2 (got {0})")]
    GroupTooSmall(usize),
    #[error("alert_fraction must lie in [0, 1] (got {0})")]
    AlertFraction(f64),
    #[error("continuation_probability must lie in [0, 1] (got {0})")]
    ContinuationProbability(f64),
    #[error("initial_infected ({infected}) must be smaller than group_size ({group_size})")]
    TooManyInitialInfected { infected: usize, group_size: usize },
    #[error("activity_max must be positive")]
    ZeroActivityMax,
    #[error("r0 must be finite and non-negative (got {0})")]
    R0(f64),
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Experiment mode mirrors the live sessions (5 safe rounds, 30 fixed rounds
/// then coin flips); simulation mode starts the outbreak in round 1 and runs a
/// fixed 29-round horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameMode {
    Experiment,
    Simulation,
}

/// Full parameterisation of one group's game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub group_size: usize,
    pub r0: f64,
    pub infection_cost: f64,
    pub activity_benefit: f64,
    pub activity_max: u32,
    pub alert_fraction: f64,
    pub initial_infected: usize,
    pub safe_rounds: u32,
    pub fixed_rounds_after_outbreak: u32,
    pub continuation_probability: f64,
    pub missed_decision_penalty: f64,
    pub treatment: Treatment,
    pub seed: u64,
}

impl GameConfig {
    pub fn experiment(treatment: Treatment, group_size: usize, seed: u64) -> Self {
        GameConfig {
            group_size,
            r0: 3.0,
            infection_cost: 150.0,
            activity_benefit: 1.0,
            activity_max: 100,
            alert_fraction: 1.0 / 3.0,
            initial_infected: default_initial_infected(group_size),
            safe_rounds: 5,
            fixed_rounds_after_outbreak: 30,
            continuation_probability: 0.5,
            missed_decision_penalty: 100.0,
            treatment,
            seed,
        }
    }

    pub fn simulation(treatment: Treatment, seed: u64) -> Self {
        GameConfig {
            safe_rounds: 0,
            fixed_rounds_after_outbreak: 29,
            continuation_probability: 0.0,
            ..GameConfig::experiment(treatment, 12, seed)
        }
    }

    pub fn mode(&self) -> GameMode {
        if self.safe_rounds == 0 && self.continuation_probability == 0.0 {
            GameMode::Simulation
        } else {
            GameMode::Experiment
        }
    }

    pub fn with_treatment(&self, treatment: Treatment) -> Self {
        GameConfig {
            treatment,
            ..self.clone()
        }
    }

    /// Last round that is always played.
    pub fn fixed_horizon(&self) -> u32 {
        self.safe_rounds + self.fixed_rounds_after_outbreak
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.group_size < 2 {
            return Err(ConfigError::GroupTooSmall(self.group_size));
        }
        if !(0.0..=1.0).contains(&self.alert_fraction) {
            return Err(ConfigError::AlertFraction(self.alert_fraction));
        }
        if !(0.0..=1.0).contains(&self.continuation_probability) {
            return Err(ConfigError::ContinuationProbability(
                self.continuation_probability,
            ));
        }
        if self.initial_infected >= self.group_size {
            return Err(ConfigError::TooManyInitialInfected {
                infected: self.initial_infected,
                group_size: self.group_size,
            });
        }
        if self.activity_max == 0 {
            return Err(ConfigError::ZeroActivityMax);
        }
        if !self.r0.is_finite() || self.r0 < 0.0 {
            return Err(ConfigError::R0(self.r0));
        }
        for (field, v) in [
            ("infection_cost", self.infection_cost),
            ("activity_benefit", self.activity_benefit),
            ("missed_decision_penalty", self.missed_decision_penalty),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::Invalid {
                    field,
                    reason: format!("must be finite (got {v})"),
                });
            }
        }
        Ok(())
    }
}

/// Four initial infections, five for groups of 14 or more.
pub fn default_initial_infected(group_size: usize) -> usize {
    if group_size >= 14 {
        5
    } else {
        4
    }
}
