//! Decision providers: what an agent does given what it can see.

mod calibrated;
mod coefficients;
mod equilibrium;
mod rational;
mod scripted;

pub use calibrated::CalibratedPolicy;
pub use coefficients::{CoefficientError, CoefficientSet, Feature, ModelCoefficients, Preset};
pub use equilibrium::{
    check_ranking, solve_all, solve_symmetric_steady_state, theory_verdicts, EquilibriumSolution,
    RankingVerdict, SolverError, SolverOptions, ACTIVITY_TOL, PREVALENCE_TOL, THEORY_ACTIVITY,
    THEORY_INFECTION, THEORY_WELFARE, WELFARE_TOL,
};
pub use rational::{
    rational_activity, rational_quarantine, rational_tracing, RationalChoice, RationalPolicy,
};
pub use scripted::{ConstantPolicy, ScriptedPolicy};

use serde::{Deserialize, Serialize};

use crate::config::GameConfig;
use crate::harness::Endowments;
use crate::model::{Decision, GroupState};
use crate::rng::SimRng;
use crate::treatment::Treatment;

/// Everything an agent is shown at the start of a round, plus its own
/// private traits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub treatment: Treatment,
    pub round_index: u32,
    pub group_size: usize,
    pub outbreak_started: bool,
    pub displayed_infected_count: usize,
    pub last_round_mean_activity: f64,
    pub prev_activity: f64,
    pub prev_infected: bool,
    pub prev_alerted: bool,
    pub in_quarantine: bool,
    pub alerted_now: bool,
    pub endowments: Endowments,
}

impl Observables {
    /// Observables of `agent` at the start of the current round of `state`.
    pub fn of(state: &GroupState, agent: usize, cfg: &GameConfig) -> Self {
        let a = &state.agents[agent];
        Observables {
            treatment: cfg.treatment,
            round_index: state.round_index,
            group_size: state.group_size(),
            outbreak_started: state.outbreak_started,
            displayed_infected_count: state.infected_count(),
            last_round_mean_activity: a.lagged.prev_group_mean_activity,
            prev_activity: a.lagged.prev_activity,
            prev_infected: a.lagged.prev_infected,
            prev_alerted: a.lagged.prev_alerted,
            in_quarantine: a.in_quarantine,
            alerted_now: false,
            endowments: a.endowments,
        }
    }

    pub fn alerted(mut self) -> Self {
        self.alerted_now = true;
        self
    }
}

/// A behaviour rule for one seat. Implementations must be pure given the
/// observables and the rng they are handed.
pub trait DecisionProvider: Send + Sync {
    fn choose_activity(&self, obs: &Observables, rng: &mut SimRng) -> u32;
    fn choose_tracing(&self, obs: &Observables, rng: &mut SimRng) -> bool;
    /// Only called for alerted agents.
    fn choose_quarantine(&self, obs: &Observables, rng: &mut SimRng) -> bool;

    /// Activity and tracing for the round, made legal for the treatment.
    /// The quarantine answer is left open and asked for after alerts.
    fn decide(&self, obs: &Observables, cfg: &GameConfig, rng: &mut SimRng) -> Decision {
        let activity = self.choose_activity(obs, rng);
        let tracing = self.choose_tracing(obs, rng);
        Decision::new(activity, tracing, None).coerce(cfg, obs.in_quarantine, obs.outbreak_started)
    }
}

impl<P: DecisionProvider + ?Sized> DecisionProvider for Box<P> {
    fn choose_activity(&self, obs: &Observables, rng: &mut SimRng) -> u32 {
        (**self).choose_activity(obs, rng)
    }
    fn choose_tracing(&self, obs: &Observables, rng: &mut SimRng) -> bool {
        (**self).choose_tracing(obs, rng)
    }
    fn choose_quarantine(&self, obs: &Observables, rng: &mut SimRng) -> bool {
        (**self).choose_quarantine(obs, rng)
    }
}
