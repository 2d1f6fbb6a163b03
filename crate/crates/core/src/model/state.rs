use serde::{Deserialize, Serialize};

use super::ops::{self, compute_payoff};
use super::record::{AgentRoundRecord, RoundRecord};
use super::ModelError;
use crate::config::GameConfig;
use crate::harness::Endowments;
use crate::rng::SimRng;
use crate::treatment::{ActivityMode, ProgramMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Health {
    Healthy,
    Infected,
}

/// What an agent carries over from the previous round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lagged {
    pub prev_activity: f64,
    pub prev_infected: bool,
    pub prev_alerted: bool,
    pub prev_group_mean_activity: f64,
}

impl Lagged {
    pub fn initial(activity: f64) -> Self {
        Lagged {
            prev_activity: activity,
            prev_infected: false,
            prev_alerted: false,
            prev_group_mean_activity: activity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub agent_id: usize,
    pub health: Health,
    pub in_quarantine: bool,
    pub activity: u32,
    pub traced: bool,
    pub exposed_this_round: bool,
    pub alerted_this_round: bool,
    pub pending_quarantine: bool,
    pub payoff_this_round: f64,
    pub endowments: Endowments,
    pub lagged: Lagged,
}

impl AgentState {
    pub fn is_infected(&self) -> bool {
        self.health == Health::Infected
    }
}

/// One agent's choices for a round.
///
/// `quarantine_on_alert` is the answer the agent gives if it gets alerted;
/// `None` means "ask me later" (or "no" when [`step_round`](super::step_round)
/// is used). `missed` marks a session round in which the human failed to
/// submit and defaults were applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub activity: u32,
    pub tracing: bool,
    pub quarantine_on_alert: Option<bool>,
    #[serde(default)]
    pub missed: bool,
}

impl Decision {
    pub fn new(activity: u32, tracing: bool, quarantine_on_alert: Option<bool>) -> Self {
        Decision {
            activity,
            tracing,
            quarantine_on_alert,
            missed: false,
        }
    }

    /// Force a decision into the legal set for the agent's situation.
    pub fn coerce(mut self, cfg: &GameConfig, in_quarantine: bool, outbreak_started: bool) -> Self {
        let t = cfg.treatment;
        self.activity = self.activity.min(cfg.activity_max);
        if in_quarantine {
            self.activity = 0;
        } else if t.activity_mode() == ActivityMode::FixedAtMax {
            self.activity = cfg.activity_max;
        }
        if outbreak_started {
            match t.tracing_mode() {
                ProgramMode::Mandatory => self.tracing = true,
                ProgramMode::Unavailable => self.tracing = false,
                ProgramMode::Optional => {}
            }
            match t.quarantine_mode() {
                ProgramMode::Mandatory => self.quarantine_on_alert = Some(true),
                ProgramMode::Unavailable => self.quarantine_on_alert = None,
                ProgramMode::Optional => {}
            }
        }
        self
    }

    pub(crate) fn check(
        &self,
        agent: usize,
        cfg: &GameConfig,
        in_quarantine: bool,
        outbreak_started: bool,
    ) -> Result<(), ModelError> {
        let t = cfg.treatment;
        let illegal = |reason: String| Err(ModelError::IllegalDecision { agent, reason });
        if self.activity > cfg.activity_max {
            return illegal(format!(
                "activity {} exceeds maximum {}",
                self.activity, cfg.activity_max
            ));
        }
        if in_quarantine && self.activity != 0 {
            return illegal(format!(
                "quarantined agent chose activity {}",
                self.activity
            ));
        }
        if !in_quarantine
            && t.activity_mode() == ActivityMode::FixedAtMax
            && self.activity != cfg.activity_max
        {
            return illegal(format!(
                "activity is fixed at {} under {t}",
                cfg.activity_max
            ));
        }
        if outbreak_started {
            match (t.tracing_mode(), self.tracing) {
                (ProgramMode::Mandatory, false) => {
                    return illegal(format!("tracing is mandatory under {t}"))
                }
                (ProgramMode::Unavailable, true) => {
                    return illegal(format!("tracing does not exist under {t}"))
                }
                _ => {}
            }
            match (t.quarantine_mode(), self.quarantine_on_alert) {
                (ProgramMode::Mandatory, Some(false)) => {
                    return illegal(format!("quarantine is mandatory under {t}"))
                }
                (ProgramMode::Unavailable, Some(true)) => {
                    return illegal(format!("quarantine does not exist under {t}"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Snapshot of a group at the start of round `round_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupState {
    pub round_index: u32,
    pub agents: Vec<AgentState>,
    pub outbreak_started: bool,
    #[serde(skip, default = "default_rng")]
    pub(crate) rng: SimRng,
}

fn default_rng() -> SimRng {
    crate::rng::StreamKey::root(0).rng()
}

impl GroupState {
    /// Round-1 state. In simulation mode (no safe rounds) the outbreak is
    /// seeded immediately so that round 1 already has infected agents.
    pub fn new(
        cfg: &GameConfig,
        endowments: Vec<Endowments>,
        initial_lag_activity: f64,
        rng: SimRng,
    ) -> Result<GroupState, ModelError> {
        cfg.validate()?;
        if endowments.len() != cfg.group_size {
            return Err(ModelError::Contract(format!(
                "{} endowments for a group of {}",
                endowments.len(),
                cfg.group_size
            )));
        }
        let agents = endowments
            .into_iter()
            .enumerate()
            .map(|(agent_id, endowments)| AgentState {
                agent_id,
                health: Health::Healthy,
                in_quarantine: false,
                activity: 0,
                traced: false,
                exposed_this_round: false,
                alerted_this_round: false,
                pending_quarantine: false,
                payoff_this_round: 0.0,
                endowments,
                lagged: Lagged::initial(initial_lag_activity),
            })
            .collect();
        let state = GroupState {
            round_index: 1,
            agents,
            outbreak_started: false,
            rng,
        };
        if cfg.safe_rounds == 0 {
            outbreak_seed_in_place(state, cfg)
        } else {
            Ok(state)
        }
    }

    pub fn group_size(&self) -> usize {
        self.agents.len()
    }

    pub fn infected_count(&self) -> usize {
        self.agents.iter().filter(|a| a.is_infected()).count()
    }

    pub fn quarantined_count(&self) -> usize {
        self.agents.iter().filter(|a| a.in_quarantine).count()
    }

    /// Mean activity of the previous round over all agents.
    pub fn last_round_mean_activity(&self) -> f64 {
        self.agents
            .first()
            .map_or(0.0, |a| a.lagged.prev_group_mean_activity)
    }

    pub fn rng_fingerprint(&self) -> u64 {
        use rand::RngCore;
        self.rng.clone().next_u64()
    }

    /// Record decisions, spread the disease and send alerts.
    pub fn begin_round(
        &self,
        decisions: &[Decision],
        cfg: &GameConfig,
    ) -> Result<PendingRound, ModelError> {
        let n = self.agents.len();
        if decisions.len() != n {
            return Err(ModelError::DecisionCount {
                expected: n,
                got: decisions.len(),
            });
        }
        if n != cfg.group_size {
            return Err(ModelError::Contract(format!(
                "state has {n} agents, config says {}",
                cfg.group_size
            )));
        }
        for (agent, d) in self.agents.iter().zip(decisions) {
            d.check(
                agent.agent_id,
                cfg,
                agent.in_quarantine,
                self.outbreak_started,
            )?;
        }

        let mut next = self.clone();
        let programs_live = self.outbreak_started;
        for (agent, d) in next.agents.iter_mut().zip(decisions) {
            agent.activity = d.activity;
            agent.traced = programs_live
                && d.tracing
                && cfg.treatment.tracing_mode() != ProgramMode::Unavailable;
            agent.exposed_this_round = false;
            agent.alerted_this_round = false;
            agent.pending_quarantine = false;
        }

        let total: u64 = next.agents.iter().map(|a| a.activity as u64).sum();
        let mean_activity = total as f64 / n as f64;
        let infected = next.infected_count();
        let quarantined = next
            .agents
            .iter()
            .filter(|a| a.in_quarantine && a.is_infected())
            .count();
        let scaled_mean = mean_activity * 100.0 / cfg.activity_max as f64;
        let expected = ops::expected_exposures(infected, quarantined, n, scaled_mean, cfg.r0)?;

        let mut rng = next.rng.clone();
        let exposed = ops::select_exposed(&next, expected as usize, &mut rng);
        next.rng = rng;
        for &i in &exposed {
            next.agents[i].exposed_this_round = true;
        }

        let alerted = if cfg.treatment.tracing_mode() == ProgramMode::Unavailable || !programs_live
        {
            Vec::new()
        } else {
            let exposed_traced: Vec<usize> = exposed
                .iter()
                .copied()
                .filter(|&i| next.agents[i].traced)
                .collect();
            ops::send_alerts(&exposed_traced, cfg.alert_fraction, &mut next.rng)
        };
        for &i in &alerted {
            next.agents[i].alerted_this_round = true;
        }

        Ok(PendingRound {
            state: next,
            decisions: decisions.to_vec(),
            mean_activity,
            expected_exposures: expected,
            exposed,
            alerted,
        })
    }
}

/// A round whose spreading and alerts are done, waiting for quarantine answers.
#[derive(Debug, Clone)]
pub struct PendingRound {
    state: GroupState,
    decisions: Vec<Decision>,
    mean_activity: f64,
    expected_exposures: u32,
    exposed: Vec<usize>,
    alerted: Vec<usize>,
}

impl PendingRound {
    /// Agents alerted this round, ascending.
    pub fn alerted(&self) -> Vec<usize> {
        let mut a = self.alerted.clone();
        a.sort_unstable();
        a
    }

    pub fn exposed(&self) -> Vec<usize> {
        let mut e = self.exposed.clone();
        e.sort_unstable();
        e
    }

    pub fn mean_activity(&self) -> f64 {
        self.mean_activity
    }

    pub fn expected_exposures(&self) -> u32 {
        self.expected_exposures
    }

    pub fn state(&self) -> &GroupState {
        &self.state
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    /// Flag `agent` as having missed a decision this round (for a prompt
    /// that timed out after spreading). The penalty still applies once.
    pub fn mark_missed(&mut self, agent: usize) {
        if let Some(d) = self.decisions.get_mut(agent) {
            d.missed = true;
        }
    }

    /// Quarantine answers come from `answer(agent)` for alerted agents only;
    /// mandatory regimes override the answer with "yes", and `None` counts as
    /// "no".
    pub fn finish<F>(
        self,
        cfg: &GameConfig,
        mut answer: F,
    ) -> Result<(GroupState, RoundRecord), ModelError>
    where
        F: FnMut(usize) -> Option<bool>,
    {
        let PendingRound {
            mut state,
            decisions,
            mean_activity,
            ..
        } = self;
        let mode = cfg.treatment.quarantine_mode();
        let round_index = state.round_index;

        let mut chose = vec![false; state.agents.len()];
        for agent in state.agents.iter_mut().filter(|a| a.alerted_this_round) {
            let yes = match mode {
                ProgramMode::Mandatory => true,
                ProgramMode::Unavailable => false,
                ProgramMode::Optional => answer(agent.agent_id).unwrap_or(false),
            };
            agent.pending_quarantine = yes;
            chose[agent.agent_id] = yes;
        }

        let mut rows = Vec::with_capacity(state.agents.len());
        for (agent, d) in state.agents.iter_mut().zip(&decisions) {
            agent.payoff_this_round =
                compute_payoff(agent.activity, agent.is_infected(), d.missed, cfg);
            rows.push(AgentRoundRecord {
                agent: agent.agent_id,
                activity: agent.activity,
                traced: agent.traced,
                alerted: agent.alerted_this_round,
                exposed: agent.exposed_this_round,
                quarantined: agent.in_quarantine,
                chose_quarantine: chose[agent.agent_id],
                infected: agent.is_infected(),
                missed: d.missed,
                payoff: agent.payoff_this_round,
            });
        }
        let record = RoundRecord::new(round_index, rows);
        debug_assert!((record.aggregates.mean_activity - mean_activity).abs() < 1e-9);

        // transition to t+1
        let mut next = state;
        for agent in next.agents.iter_mut() {
            agent.lagged = Lagged {
                prev_activity: agent.activity as f64,
                prev_infected: agent.is_infected(),
                prev_alerted: agent.alerted_this_round,
                prev_group_mean_activity: mean_activity,
            };
            agent.health = if agent.exposed_this_round {
                Health::Infected
            } else {
                Health::Healthy
            };
            agent.in_quarantine = agent.pending_quarantine;
            agent.pending_quarantine = false;
        }
        next.round_index += 1;

        if !next.outbreak_started && round_index >= cfg.safe_rounds {
            next = outbreak_seed_in_place(next, cfg)?;
        }
        Ok((next, record))
    }
}

fn outbreak_seed_in_place(state: GroupState, cfg: &GameConfig) -> Result<GroupState, ModelError> {
    let mut rng = state.rng.clone();
    let mut next = ops::outbreak_seed(&state, cfg, &mut rng)?;
    next.rng = rng;
    Ok(next)
}
