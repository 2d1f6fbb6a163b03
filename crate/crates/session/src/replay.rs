//! Replay a session without timers or a network.

use sisgame_core::model::{should_continue, RoundRecord};
use sisgame_core::policy::Observables;

use crate::error::SessionError;
use crate::session::{setup, HumanRound, SessionSpec};

/// Re-run the game of `spec` with the human's logged rounds in place of the
/// live seat. Stops where the log stops or the game ends.
pub fn replay(spec: &SessionSpec, human: &[HumanRound]) -> Result<Vec<RoundRecord>, SessionError> {
    let cfg = spec.game_config()?;
    let bots = spec.bot_policy.build(&cfg).map_err(|e| SessionError::Invalid(e.to_string()))?;
    let (mut state, mut streams) = setup(spec, &cfg)?;
    let seat = spec.human_seat;
    let mut records = Vec::with_capacity(human.len());
    for h in human {
        if h.round != state.round_index {
            return Err(SessionError::Invalid(format!("log has round {} where {} was due", h.round, state.round_index)));
        }
        let decisions: Vec<_> = (0..cfg.group_size)
            .map(|i| {
                if i == seat {
                    h.decision
                } else {
                    bots.decide(&Observables::of(&state, i, &cfg), &cfg, &mut streams.policy[i])
                }
            })
            .collect();
        let mut pending = state.begin_round(&decisions, &cfg).map_err(|e| SessionError::Invalid(e.to_string()))?;
        let mut answers = vec![None; cfg.group_size];
        for i in pending.alerted() {
            answers[i] = if i == seat {
                h.quarantine
            } else {
                Some(bots.choose_quarantine(&Observables::of(pending.state(), i, &cfg).alerted(), &mut streams.policy[i]))
            };
        }
        if h.quarantine_missed {
            pending.mark_missed(seat);
        }
        let (next, record) = pending.finish(&cfg, |i| answers[i]).map_err(|e| SessionError::Invalid(e.to_string()))?;
        records.push(record);
        state = next;
        if !should_continue(h.round, &cfg, &mut streams.termination) {
            break;
        }
    }
    Ok(records)
}
