use serde::{Deserialize, Serialize};

use super::equilibrium::EquilibriumSolution;
use super::{DecisionProvider, Observables};
use crate::model::ModelError;
use crate::rng::SimRng;
use crate::treatment::{ActivityMode, Treatment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationalChoice {
    Yes,
    No,
    /// Joining or not makes no difference to the agent.
    Indeterminate,
    /// The program does not exist.
    Unavailable,
}

impl RationalChoice {
    pub fn resolve(self, indeterminate_default: bool) -> bool {
        match self {
            RationalChoice::Yes => true,
            RationalChoice::No | RationalChoice::Unavailable => false,
            RationalChoice::Indeterminate => indeterminate_default,
        }
    }
}

/// Sign up when tracing is forced or when the alert can be exploited;
/// under `OM` an alert only costs a round of activity, so stay out.
pub fn rational_tracing(t: Treatment) -> RationalChoice {
    match t {
        Treatment::MM | Treatment::MO | Treatment::OO => RationalChoice::Yes,
        Treatment::OM => RationalChoice::No,
        Treatment::NI => RationalChoice::Unavailable,
        Treatment::NA => RationalChoice::Indeterminate,
    }
}

/// An alerted agent is certain to be infected next round; quarantine only
/// removes that round's activity, so a free choice is always "no".
pub fn rational_quarantine(t: Treatment, alerted: bool) -> Result<bool, ModelError> {
    if !alerted {
        return Err(ModelError::Contract(
            "quarantine is only decided after an alert".into(),
        ));
    }
    Ok(matches!(t, Treatment::MM | Treatment::OM))
}

pub fn rational_activity(
    obs: &Observables,
    solution: &EquilibriumSolution,
    activity_max: u32,
) -> u32 {
    if obs.in_quarantine {
        0
    } else if obs.treatment.activity_mode() == ActivityMode::FixedAtMax
        || !obs.outbreak_started
        || obs.prev_alerted
    {
        // before the outbreak there is nothing to avoid; after an alert the
        // infection is already certain
        activity_max
    } else {
        solution.steady_activity
    }
}

/// Self-interested agents playing the solved symmetric steady state of each
/// treatment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalPolicy {
    pub solutions: Vec<EquilibriumSolution>,
    pub na_tracing_default: bool,
    pub activity_max: u32,
}

impl RationalPolicy {
    pub fn new(solutions: Vec<EquilibriumSolution>, na_tracing_default: bool) -> Self {
        RationalPolicy {
            solutions,
            na_tracing_default,
            activity_max: 100,
        }
    }

    pub fn solution(&self, t: Treatment) -> &EquilibriumSolution {
        self.solutions
            .iter()
            .find(|s| s.treatment == t)
            .unwrap_or_else(|| panic!("no equilibrium solved for {t}"))
    }
}

impl DecisionProvider for RationalPolicy {
    fn choose_activity(&self, obs: &Observables, _rng: &mut SimRng) -> u32 {
        rational_activity(obs, self.solution(obs.treatment), self.activity_max)
    }

    fn choose_tracing(&self, obs: &Observables, _rng: &mut SimRng) -> bool {
        obs.outbreak_started && rational_tracing(obs.treatment).resolve(self.na_tracing_default)
    }

    fn choose_quarantine(&self, obs: &Observables, _rng: &mut SimRng) -> bool {
        rational_quarantine(obs.treatment, true).unwrap_or(false)
    }
}
