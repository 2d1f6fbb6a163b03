use rand::seq::index;
use rand::Rng;

use super::record::RoundRecord;
use super::state::{Decision, GroupState, Health};
use super::ModelError;
use crate::config::{ConfigError, GameConfig};
use crate::rng::SimRng;

/// Nearest integer, ties away from zero (2.5 -> 3, -2.5 -> -3).
pub fn round_half_away(x: f64) -> i64 {
    x.round() as i64
}

/// Unrounded expected number of new exposures.
///
/// Every infected agent outside quarantine exposes `r0 * A^2` agents, scaled
/// by the healthy share of the group, where `A` is mean activity on a 0..1
/// scale.
pub fn expected_exposures_raw(
    infected: usize,
    infected_quarantined: usize,
    group_size: usize,
    mean_activity: f64,
    r0: f64,
) -> Result<f64, ModelError> {
    if infected_quarantined > infected || infected > group_size || group_size == 0 {
        return Err(ModelError::Contract(format!(
            "need 0 <= quarantined ({infected_quarantined}) <= infected ({infected}) <= group size ({group_size})"
        )));
    }
    if !(0.0..=100.0).contains(&mean_activity) {
        return Err(ModelError::Contract(format!(
            "mean activity {mean_activity} outside [0, 100]"
        )));
    }
    let spreaders = (infected - infected_quarantined) as f64;
    let a = mean_activity / 100.0;
    Ok(r0 * spreaders / group_size as f64 * (group_size - infected) as f64 * a * a)
}

/// [`expected_exposures_raw`] rounded half away from zero. The caller caps
/// the result at the number of eligible agents.
pub fn expected_exposures(
    infected: usize,
    infected_quarantined: usize,
    group_size: usize,
    mean_activity: f64,
    r0: f64,
) -> Result<u32, ModelError> {
    let raw = expected_exposures_raw(
        infected,
        infected_quarantined,
        group_size,
        mean_activity,
        r0,
    )?;
    Ok(round_half_away(raw).max(0) as u32)
}

/// Pick up to `n_exposed` healthy agents, one at a time without replacement,
/// each draw proportional to activity. Agents with zero activity are never
/// picked. Returned in draw order.
pub fn select_exposed(state: &GroupState, n_exposed: usize, rng: &mut SimRng) -> Vec<usize> {
    let mut pool: Vec<(usize, u64)> = state
        .agents
        .iter()
        .filter(|a| a.health == Health::Healthy && a.activity > 0)
        .map(|a| (a.agent_id, a.activity as u64))
        .collect();
    let take = n_exposed.min(pool.len());
    let mut picked = Vec::with_capacity(take);
    for _ in 0..take {
        let total: u64 = pool.iter().map(|&(_, w)| w).sum();
        let mut ticket = rng.random_range(0..total);
        let pos = pool
            .iter()
            .position(|&(_, w)| {
                if ticket < w {
                    true
                } else {
                    ticket -= w;
                    false
                }
            })
            .expect("ticket below total weight");
        picked.push(pool.remove(pos).0);
    }
    picked
}

/// Alert `round(|exposed_traced| * alert_fraction)` of the exposed, traced
/// agents, chosen uniformly without replacement.
pub fn send_alerts(exposed_traced: &[usize], alert_fraction: f64, rng: &mut SimRng) -> Vec<usize> {
    let n = exposed_traced.len();
    if n == 0 {
        return Vec::new();
    }
    let k = (round_half_away(n as f64 * alert_fraction).max(0) as usize).min(n);
    index::sample(rng, n, k)
        .into_iter()
        .map(|i| exposed_traced[i])
        .collect()
}

pub fn compute_payoff(
    activity: u32,
    infected: bool,
    missed_decision: bool,
    cfg: &GameConfig,
) -> f64 {
    let mut payoff = cfg.activity_benefit * activity as f64;
    if infected {
        payoff -= cfg.infection_cost;
    }
    if missed_decision {
        payoff -= cfg.missed_decision_penalty;
    }
    payoff
}

/// Infect `initial_infected` distinct agents chosen uniformly at random.
pub fn outbreak_seed(
    state: &GroupState,
    cfg: &GameConfig,
    rng: &mut SimRng,
) -> Result<GroupState, ModelError> {
    if state.outbreak_started {
        return Err(ModelError::OutbreakStarted);
    }
    let n = state.agents.len();
    if cfg.initial_infected >= n {
        return Err(ConfigError::TooManyInitialInfected {
            infected: cfg.initial_infected,
            group_size: n,
        }
        .into());
    }
    let mut next = state.clone();
    for i in index::sample(rng, n, cfg.initial_infected) {
        next.agents[i].health = Health::Infected;
    }
    next.outbreak_started = true;
    Ok(next)
}

/// Whether another round follows `round_index`. Rounds inside the fixed
/// horizon always continue; after it each round continues with
/// `continuation_probability`.
pub fn should_continue(round_index: u32, cfg: &GameConfig, rng: &mut SimRng) -> bool {
    if round_index < cfg.fixed_horizon() {
        return true;
    }
    rng.random_bool(cfg.continuation_probability)
}

/// Run a whole round with quarantine answers taken from the decisions.
pub fn step_round(
    state: &GroupState,
    decisions: &[Decision],
    cfg: &GameConfig,
) -> Result<(GroupState, RoundRecord), ModelError> {
    let pending = state.begin_round(decisions, cfg)?;
    pending.finish(cfg, |agent| decisions[agent].quarantine_on_alert)
}
