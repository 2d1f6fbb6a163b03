use std::collections::BTreeSet;

use sisgame_core::Treatment;
use sisgame_session::{replay, FinishReason, Phase, SessionCore, SessionError, SessionSpec, Submission};

fn spec(t: Treatment, seed: u64) -> SessionSpec {
    SessionSpec { fixed_rounds: Some(8), ..SessionSpec::new(t, seed) }
}

fn decide(core: &mut SessionCore, now: u64, activity: u32, tracing: bool) -> Result<(), SessionError> {
    let v = core.view();
    let sub = Submission {
        round: v.round_index,
        activity: v.awaiting.iter().any(|f| f == "activity").then_some(activity),
        tracing: v.awaiting.iter().any(|f| f == "tracing").then_some(tracing),
        quarantine: None,
    };
    core.submit(sub, now)
}

/// Skip to the end of the current results phase.
fn next(core: &mut SessionCore) -> u64 {
    let d = core.deadline().expect("a running phase has a deadline");
    core.advance(d);
    d
}

#[test]
fn capabilities_follow_the_treatment() {
    let caps = |t| SessionCore::new(spec(t, 1), 0).unwrap().view().capabilities;
    let oo = caps(Treatment::OO);
    assert!(oo.activity && oo.tracing && oo.quarantine);
    let na = caps(Treatment::NA);
    assert!(!na.activity && na.tracing && na.quarantine);
    let ni = caps(Treatment::NI);
    assert!(ni.activity && !ni.tracing && !ni.quarantine);
    let mm = caps(Treatment::MM);
    assert!(mm.activity && !mm.tracing && !mm.quarantine);
}

#[test]
fn a_safe_round_pays_the_activity() {
    let mut core = SessionCore::new(spec(Treatment::OO, 3), 1_000).unwrap();
    let v = core.view();
    assert_eq!((v.round_index, v.phase, v.deadline_ms), (1, Phase::Deciding, Some(21_000)));
    assert_eq!(v.awaiting, vec!["activity"]);
    assert!(!v.outbreak_started);
    core.submit(Submission { round: 1, activity: Some(97), ..Default::default() }, 2_000).unwrap();
    let v = core.view();
    assert_eq!(v.phase, Phase::Results);
    assert_eq!(v.deadline_ms, Some(12_000));
    let b = v.own.last_round.unwrap();
    assert_eq!((b.activity, b.activity_points, b.infection_cost, b.penalty, b.total), (97, 97.0, 0.0, 0.0, 97.0));
    assert_eq!(v.own.cumulative_points, 97.0);
    // snapshots are idempotent
    assert_eq!(core.view(), v);
}

#[test]
fn missed_rounds_take_defaults_and_the_penalty() {
    let mut core = SessionCore::new(spec(Treatment::OO, 4), 0).unwrap();
    core.advance(20_000);
    let v = core.view();
    assert_eq!(v.phase, Phase::Results);
    let b = v.own.last_round.unwrap();
    assert_eq!((b.activity, b.penalty, b.total), (0, 100.0, -100.0));
    assert_eq!(v.own.consecutive_misses, 1);
    assert_eq!(core.human_log()[0].decision.activity, 0);
    assert!(core.human_log()[0].decision.missed);

    // answering resets the streak
    next(&mut core);
    decide(&mut core, 30_001, 50, true).unwrap();
    assert_eq!(core.view().own.consecutive_misses, 0);
    next(&mut core);
    for k in 1..=3 {
        let d = core.deadline().unwrap();
        core.advance(d);
        assert_eq!(core.view().own.consecutive_misses, k);
        if k < 3 {
            next(&mut core);
        }
    }
    next(&mut core);
    let v = core.view();
    assert_eq!(v.phase, Phase::Finished);
    assert_eq!(v.finish_reason, Some(FinishReason::Disqualified));
    assert_eq!(v.deadline_ms, None);
    assert_eq!(core.submit(Submission { round: v.round_index + 1, activity: Some(1), ..Default::default() }, u64::MAX), Err(SessionError::Gone));
}

#[test]
fn a_late_call_processes_every_expired_phase_at_its_deadline() {
    let mut a = SessionCore::new(spec(Treatment::OM, 5), 0).unwrap();
    let mut b = SessionCore::new(spec(Treatment::OM, 5), 0).unwrap();
    a.advance(95_000);
    for t in (0..=95_000).step_by(500) {
        b.advance(t);
    }
    assert_eq!(a.view(), b.view());
    assert_eq!(a.records(), b.records());
}

#[test]
fn submissions_are_validated() {
    let mut core = SessionCore::new(spec(Treatment::NI, 6), 0).unwrap();
    let bad = |core: &mut SessionCore, sub: Submission| core.submit(sub, 1);
    assert!(matches!(bad(&mut core, Submission { round: 2, activity: Some(5), ..Default::default() }), Err(SessionError::StaleRound { expected: 1, got: 2 })));
    assert!(matches!(bad(&mut core, Submission { round: 1, activity: Some(101), ..Default::default() }), Err(SessionError::Validation(_))));
    assert!(matches!(bad(&mut core, Submission { round: 1, tracing: Some(true), ..Default::default() }), Err(SessionError::Validation(_))));
    assert!(matches!(bad(&mut core, Submission { round: 1, quarantine: Some(true), ..Default::default() }), Err(SessionError::Validation(_))));
    assert!(matches!(bad(&mut core, Submission { round: 1, ..Default::default() }), Err(SessionError::Validation(_))));
    assert_eq!(core.view().version, 1, "rejected submissions change nothing");
    core.submit(Submission { round: 1, activity: Some(5), ..Default::default() }, 2).unwrap();
    // resolved round and not-yet-open round
    assert!(matches!(core.submit(Submission { round: 1, activity: Some(5), ..Default::default() }, 3), Err(SessionError::StaleRound { .. })));
    assert!(matches!(core.submit(Submission { round: 2, activity: Some(5), ..Default::default() }, 3), Err(SessionError::NotOpen(_))));

    let mut na = SessionCore::new(spec(Treatment::NA, 6), 0).unwrap();
    // activity is fixed and tracing is not live yet: the safe rounds run themselves
    assert_eq!(na.view().phase, Phase::Results);
    assert!(na.view().awaiting.is_empty());
    assert!(matches!(na.submit(Submission { round: 1, activity: Some(100), ..Default::default() }, 1), Err(SessionError::StaleRound { .. })));
    // once the outbreak starts only tracing is asked for
    while na.view().awaiting.is_empty() {
        let d = na.deadline().unwrap();
        na.advance(d);
    }
    let v = na.view();
    assert_eq!(v.awaiting, vec!["tracing"]);
    assert!(matches!(na.submit(Submission { round: v.round_index, activity: Some(100), tracing: Some(true), ..Default::default() }, na.deadline().unwrap() - 1), Err(SessionError::Validation(_))));
}

/// Play a whole session with an eager human: full activity, tracing on,
/// refusing quarantine every other prompt and sometimes idling.
fn play(t: Treatment, seed: u64) -> (SessionCore, Vec<u64>, Vec<Phase>) {
    let mut core = SessionCore::new(spec(t, seed), 0).unwrap();
    let mut deadlines = vec![core.deadline().unwrap()];
    let mut phases = vec![core.phase()];
    let mut now = 0;
    let mut k = 0u64;
    while core.phase() != Phase::Finished {
        let v = core.view();
        k += 1;
        match v.phase {
            Phase::Deciding if !k.is_multiple_of(7) => {
                now += 1_500;
                decide(&mut core, now, 100, !k.is_multiple_of(5)).unwrap();
            }
            Phase::QuarantinePrompt if !k.is_multiple_of(3) => {
                assert_eq!(v.awaiting, vec!["quarantine"]);
                assert!(v.own.alerted);
                now += 700;
                core.submit(Submission { round: v.round_index, quarantine: Some(k.is_multiple_of(2)), ..Default::default() }, now).unwrap();
            }
            _ => {
                now = core.deadline().unwrap();
                core.advance(now);
            }
        }
        if let Some(d) = core.deadline() {
            if core.phase() != *phases.last().unwrap() || d != *deadlines.last().unwrap() {
                assert!(d > now, "deadline {d} not after the transition at {now}");
                deadlines.push(d);
                phases.push(core.phase());
            }
        }
        assert!(k < 10_000);
    }
    (core, deadlines, phases)
}

#[test]
fn live_sessions_replay_headlessly() {
    let mut prompts = 0;
    for (t, seed) in [(Treatment::OO, 1), (Treatment::MO, 2), (Treatment::OM, 3), (Treatment::NA, 4), (Treatment::NI, 5), (Treatment::MM, 6), (Treatment::OO, 7)] {
        let (core, _, phases) = play(t, seed);
        prompts += phases.iter().filter(|p| **p == Phase::QuarantinePrompt).count();
        let again = replay(core.spec(), core.human_log()).unwrap();
        assert_eq!(again, core.records(), "{t} seed {seed}");
        assert!(core.records().len() >= 13);
        let v = core.view();
        let history = v.history.expect("finished sessions show the history");
        assert_eq!(history.len(), core.records().len());
        let total: f64 = history.iter().map(|r| r.payoff).sum();
        assert_eq!(v.own.cumulative_points, total);
    }
    assert!(prompts > 0, "no quarantine prompt was exercised");
}

#[test]
fn deadlines_never_run_backwards() {
    let (_, deadlines, phases) = play(Treatment::OO, 11);
    assert!(phases.contains(&Phase::Results) && phases.contains(&Phase::Deciding));
    // each deadline lies after the transition that set it (checked in play);
    // consecutive phases of the same kind are spaced by at least its timer
    let decide: Vec<u64> = deadlines.iter().zip(&phases).filter(|(_, p)| **p == Phase::Deciding).map(|(d, _)| *d).collect();
    assert!(decide.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn infection_shows_up_in_the_results() {
    let mut seen = false;
    for seed in 0..20 {
        let (core, _, _) = play(Treatment::NI, seed);
        for (i, r) in core.records().iter().enumerate() {
            if r.agents[0].infected {
                seen = true;
                assert_eq!(r.agents[0].payoff, r.agents[0].activity as f64 - 150.0 - if r.agents[0].missed { 100.0 } else { 0.0 });
                assert!(i >= 5, "no infection during safe rounds");
            }
        }
        if seen {
            break;
        }
    }
    assert!(seen);
}

fn keys(v: &serde_json::Value, path: &str, out: &mut BTreeSet<String>) {
    match v {
        serde_json::Value::Object(m) => {
            for (k, x) in m {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                out.insert(p.clone());
                keys(x, &p, out);
            }
        }
        serde_json::Value::Array(a) => {
            for x in a {
                keys(x, &format!("{path}[]"), out);
            }
        }
        _ => {}
    }
}

#[test]
fn views_only_carry_permitted_fields() {
    let allowed: BTreeSet<&str> = [
        "schema_version", "version", "treatment", "round_index", "phase", "deadline_ms", "group_size",
        "outbreak_started", "infected_count", "last_round_mean_activity", "capabilities", "capabilities.activity",
        "capabilities.tracing", "capabilities.quarantine", "awaiting", "own", "own.quarantined",
        "own.traced_last_round", "own.alerted", "own.cumulative_points", "own.consecutive_misses", "own.last_round",
        "own.last_round.activity", "own.last_round.activity_points", "own.last_round.infection_cost",
        "own.last_round.penalty", "own.last_round.total", "finish_reason", "history", "history[].round",
        "history[].activity", "history[].traced", "history[].alerted", "history[].quarantined",
        "history[].infected", "history[].missed", "history[].payoff",
    ]
    .into_iter()
    .collect();
    let mut core = SessionCore::new(spec(Treatment::OO, 8), 0).unwrap();
    let mut now = 0;
    let mut seen = BTreeSet::new();
    let mut deciding_infected_hidden = true;
    while core.phase() != Phase::Finished {
        let v = core.view();
        let json = serde_json::to_value(&v).unwrap();
        keys(&json, "", &mut seen);
        if v.phase == Phase::Deciding {
            // own health this round is not derivable from the view
            deciding_infected_hidden &= !json.to_string().contains("\"infected\"");
            now += 10;
            decide(&mut core, now, 80, true).unwrap();
        } else if v.phase == Phase::QuarantinePrompt {
            now += 10;
            core.submit(Submission { round: v.round_index, quarantine: Some(false), ..Default::default() }, now).unwrap();
        } else {
            now = core.deadline().unwrap();
            core.advance(now);
        }
    }
    keys(&serde_json::to_value(core.view()).unwrap(), "", &mut seen);
    let extra: Vec<_> = seen.iter().filter(|k| !allowed.contains(k.as_str())).collect();
    assert!(extra.is_empty(), "unexpected view fields {extra:?}");
    assert!(deciding_infected_hidden);
    assert!(seen.contains("history[].payoff"));
}

#[test]
fn history_trace_is_private_until_the_end() {
    let mut core = SessionCore::new(spec(Treatment::OO, 9), 0).unwrap();
    decide(&mut core, 1, 40, true).unwrap();
    assert!(core.trace_rows().iter().all(|r| r.agent == 0));
    assert_eq!(core.trace_rows().len(), 1);
    let (done, _, _) = play(Treatment::OO, 9);
    assert_eq!(done.trace_rows().len(), done.records().len() * 12);
}

#[test]
fn bad_specs_are_rejected() {
    let mut s = SessionSpec::new(Treatment::OO, 1);
    s.human_seat = 12;
    assert!(matches!(SessionCore::new(s, 0), Err(SessionError::Invalid(_))));
    let mut s = SessionSpec::new(Treatment::OO, 1);
    s.timers.decide_ms = 0;
    assert!(matches!(SessionCore::new(s, 0), Err(SessionError::Invalid(_))));
    let err = serde_json::from_str::<SessionSpec>(r#"{"treatment": "XX"}"#);
    assert!(err.is_err());
}
