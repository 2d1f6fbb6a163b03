use serde::{Deserialize, Serialize};

use super::{DecisionProvider, Observables};
use crate::rng::SimRng;

/// Same choices every round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantPolicy {
    pub activity: u32,
    pub tracing: bool,
    pub quarantine: bool,
}

impl DecisionProvider for ConstantPolicy {
    fn choose_activity(&self, obs: &Observables, _rng: &mut SimRng) -> u32 {
        if obs.in_quarantine {
            0
        } else {
            self.activity
        }
    }
    fn choose_tracing(&self, _obs: &Observables, _rng: &mut SimRng) -> bool {
        self.tracing
    }
    fn choose_quarantine(&self, _obs: &Observables, _rng: &mut SimRng) -> bool {
        self.quarantine
    }
}

/// Round-by-round choices shared by all seats; the last step repeats once
/// the script runs out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScriptedPolicy {
    pub steps: Vec<ConstantPolicy>,
}

impl ScriptedPolicy {
    fn step(&self, round: u32) -> &ConstantPolicy {
        let i = (round.max(1) as usize - 1).min(self.steps.len().saturating_sub(1));
        &self.steps[i]
    }
}

impl DecisionProvider for ScriptedPolicy {
    fn choose_activity(&self, obs: &Observables, rng: &mut SimRng) -> u32 {
        self.step(obs.round_index).choose_activity(obs, rng)
    }
    fn choose_tracing(&self, obs: &Observables, rng: &mut SimRng) -> bool {
        self.step(obs.round_index).choose_tracing(obs, rng)
    }
    fn choose_quarantine(&self, obs: &Observables, rng: &mut SimRng) -> bool {
        self.step(obs.round_index).choose_quarantine(obs, rng)
    }
}
