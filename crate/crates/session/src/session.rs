//! One live game: a human seat among simulated agents, driven by explicit
//! timestamps so that every transition is reproducible.

use serde::{Deserialize, Serialize};

use sisgame_core::harness::{sample_endowments, BlockLabel, EndowmentParams, IdeologyBlock, PolicySpec};
use sisgame_core::model::{should_continue, PendingRound, RoundRecord, TraceRow};
use sisgame_core::policy::{DecisionProvider, Observables};
use sisgame_core::rng::{group_key, SimRng, StreamKey, ENDOWMENTS, ENGINE, POLICY, TERMINATION};
use sisgame_core::treatment::{ActivityMode, ProgramMode};
use sisgame_core::{Decision, GameConfig, GroupState, Treatment};

use crate::error::SessionError;

pub const SCHEMA_VERSION: u32 = 1;

/// Lagged activity the simulated agents start from.
pub const INITIAL_LAG_ACTIVITY: f64 = 76.6;

/// Milliseconds on whatever clock the owner uses.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Timers {
    pub decide_ms: Millis,
    pub quarantine_ms: Millis,
    pub results_ms: Millis,
}

impl Default for Timers {
    fn default() -> Self {
        Timers { decide_ms: 20_000, quarantine_ms: 15_000, results_ms: 10_000 }
    }
}

/// What the human gets when a field is missing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Defaults {
    pub activity: u32,
    /// `None` keeps the previous round's choice.
    pub tracing: Option<bool>,
    pub quarantine: bool,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_group() -> usize {
    12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub treatment: Treatment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_group")]
    pub group_size: usize,
    #[serde(default)]
    pub human_seat: usize,
    #[serde(default)]
    pub bot_policy: PolicySpec,
    #[serde(default)]
    pub timers: Timers,
    #[serde(default)]
    pub defaults: Defaults,
    /// Override the five safe rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safe_rounds: Option<u32>,
    /// Override the thirty rounds played for sure after the outbreak.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_rounds: Option<u32>,
}

impl SessionSpec {
    pub fn new(treatment: Treatment, seed: u64) -> Self {
        SessionSpec {
            schema_version: SCHEMA_VERSION,
            treatment,
            seed,
            group_size: default_group(),
            human_seat: 0,
            bot_policy: PolicySpec::default(),
            timers: Timers::default(),
            defaults: Defaults::default(),
            safe_rounds: None,
            fixed_rounds: None,
        }
    }

    pub fn game_config(&self) -> Result<GameConfig, SessionError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(SessionError::Invalid(format!("unsupported schema_version {}", self.schema_version)));
        }
        let mut cfg = GameConfig::experiment(self.treatment, self.group_size, self.seed);
        if let Some(s) = self.safe_rounds {
            cfg.safe_rounds = s;
        }
        if let Some(f) = self.fixed_rounds {
            cfg.fixed_rounds_after_outbreak = f;
        }
        cfg.validate().map_err(|e| SessionError::Invalid(e.to_string()))?;
        if self.human_seat >= self.group_size {
            return Err(SessionError::Invalid(format!(
                "human seat {} outside a group of {}",
                self.human_seat, self.group_size
            )));
        }
        if self.defaults.activity > cfg.activity_max {
            return Err(SessionError::Invalid("default activity above the maximum".into()));
        }
        let t = &self.timers;
        if t.decide_ms == 0 || t.quarantine_ms == 0 || t.results_ms == 0 {
            return Err(SessionError::Invalid("timers must be positive".into()));
        }
        Ok(cfg)
    }
}

/// Random streams of a session, laid out like a batch group so a session
/// and a headless replay draw identical numbers.
pub(crate) struct Streams {
    pub policy: Vec<SimRng>,
    pub termination: SimRng,
}

pub(crate) fn setup(spec: &SessionSpec, cfg: &GameConfig) -> Result<(GroupState, Streams), SessionError> {
    let key: StreamKey = group_key(spec.seed, 0, 0);
    let mut erng = key.child(ENDOWMENTS).rng();
    let block = IdeologyBlock::uniform(BlockLabel::Mixed);
    let params = EndowmentParams::default();
    let endowments = (0..cfg.group_size).map(|_| sample_endowments(&block, &params, &mut erng)).collect();
    let state = GroupState::new(cfg, endowments, INITIAL_LAG_ACTIVITY, key.child(ENGINE).rng())
        .map_err(|e| SessionError::Invalid(e.to_string()))?;
    let policy = (0..cfg.group_size as u64).map(|i| key.child(POLICY).child(i).rng()).collect();
    Ok((state, Streams { policy, termination: key.child(TERMINATION).rng() }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Deciding,
    QuarantinePrompt,
    Results,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Completed,
    Disqualified,
}

/// A decision the human sends. Absent fields are simply not being decided
/// by this request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub round: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracing: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quarantine: Option<bool>,
}

/// Everything the human did in one round, enough to replay it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanRound {
    pub round: u32,
    pub decision: Decision,
    /// Answer to the quarantine prompt, when one was shown.
    pub quarantine: Option<bool>,
    pub quarantine_missed: bool,
}

/// Which decisions exist in this treatment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub activity: bool,
    pub tracing: bool,
    pub quarantine: bool,
}

impl Capabilities {
    pub fn of(t: Treatment) -> Self {
        Capabilities {
            activity: t.activity_mode() == ActivityMode::Free,
            tracing: t.tracing_mode() == ProgramMode::Optional,
            quarantine: t.quarantine_mode() == ProgramMode::Optional,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffBreakdown {
    pub activity: u32,
    pub activity_points: f64,
    pub infection_cost: f64,
    pub penalty: f64,
    pub total: f64,
}

/// The human's own row of a finished round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OwnRound {
    pub round: u32,
    pub activity: u32,
    pub traced: bool,
    pub alerted: bool,
    pub quarantined: bool,
    pub infected: bool,
    pub missed: bool,
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnView {
    pub quarantined: bool,
    pub traced_last_round: bool,
    pub alerted: bool,
    pub cumulative_points: f64,
    pub consecutive_misses: u32,
    pub last_round: Option<PayoffBreakdown>,
}

/// What the human is allowed to see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientView {
    pub schema_version: u32,
    /// Bumped on every change; long polls wait for it to move.
    pub version: u64,
    pub treatment: Treatment,
    pub round_index: u32,
    pub phase: Phase,
    pub deadline_ms: Option<Millis>,
    pub group_size: usize,
    pub outbreak_started: bool,
    pub infected_count: usize,
    pub last_round_mean_activity: f64,
    pub capabilities: Capabilities,
    /// Fields the server still expects this phase.
    pub awaiting: Vec<String>,
    pub own: OwnView,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finish_reason: Option<FinishReason>,
    /// Own rounds; filled once the session is over.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<OwnRound>>,
}

struct Draft {
    activity: Option<u32>,
    tracing: Option<bool>,
}

/// The session state machine. Every method takes the current time; nothing
/// reads a clock.
pub struct SessionCore {
    spec: SessionSpec,
    cfg: GameConfig,
    bots: Box<dyn DecisionProvider>,
    state: GroupState,
    streams: Streams,
    phase: Phase,
    deadline: Option<Millis>,
    draft: Draft,
    pending: Option<(PendingRound, Vec<Option<bool>>, Decision)>,
    last_tracing: bool,
    consecutive_misses: u32,
    finish_reason: Option<FinishReason>,
    records: Vec<RoundRecord>,
    human: Vec<HumanRound>,
    version: u64,
}

impl SessionCore {
    pub fn new(spec: SessionSpec, now: Millis) -> Result<Self, SessionError> {
        let cfg = spec.game_config()?;
        let bots = spec.bot_policy.build(&cfg).map_err(|e| SessionError::Invalid(e.to_string()))?;
        let (state, streams) = setup(&spec, &cfg)?;
        let mut core = SessionCore {
            spec,
            cfg,
            bots,
            state,
            streams,
            phase: Phase::Deciding,
            deadline: None,
            draft: Draft { activity: None, tracing: None },
            pending: None,
            last_tracing: false,
            consecutive_misses: 0,
            finish_reason: None,
            records: Vec::new(),
            human: Vec::new(),
            version: 0,
        };
        core.open_round(now);
        Ok(core)
    }

    pub fn spec(&self) -> &SessionSpec {
        &self.spec
    }

    pub fn config(&self) -> &GameConfig {
        &self.cfg
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn deadline(&self) -> Option<Millis> {
        self.deadline
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn human_log(&self) -> &[HumanRound] {
        &self.human
    }

    fn seat(&self) -> usize {
        self.spec.human_seat
    }

    fn needs_activity(&self) -> bool {
        self.cfg.treatment.activity_mode() == ActivityMode::Free && !self.state.agents[self.seat()].in_quarantine
    }

    fn needs_tracing(&self) -> bool {
        self.state.outbreak_started && self.cfg.treatment.tracing_mode() == ProgramMode::Optional
    }

    fn awaiting(&self) -> Vec<&'static str> {
        match self.phase {
            Phase::Deciding => {
                let mut v = Vec::new();
                if self.needs_activity() && self.draft.activity.is_none() {
                    v.push("activity");
                }
                if self.needs_tracing() && self.draft.tracing.is_none() {
                    v.push("tracing");
                }
                v
            }
            Phase::QuarantinePrompt => vec!["quarantine"],
            Phase::Results | Phase::Finished => Vec::new(),
        }
    }

    fn set_phase(&mut self, phase: Phase, deadline: Option<Millis>) {
        self.phase = phase;
        self.deadline = deadline;
        self.version += 1;
    }

    fn open_round(&mut self, now: Millis) {
        self.draft = Draft { activity: None, tracing: None };
        self.set_phase(Phase::Deciding, Some(now + self.spec.timers.decide_ms));
        if self.awaiting().is_empty() {
            // nothing to decide (fixed activity before the programs start)
            self.resolve_decisions(now, false);
        }
    }

    /// Apply every deadline that has passed by `now`. Each expiry is
    /// processed at its own deadline, so late calls change nothing.
    pub fn advance(&mut self, now: Millis) -> bool {
        let before = self.version;
        while let Some(d) = self.deadline {
            if d > now {
                break;
            }
            match self.phase {
                Phase::Deciding => self.resolve_decisions(d, true),
                Phase::QuarantinePrompt => self.resolve_quarantine(d, None),
                Phase::Results => self.next_round(d),
                Phase::Finished => break,
            }
        }
        self.version != before
    }

    pub fn submit(&mut self, sub: Submission, now: Millis) -> Result<(), SessionError> {
        self.advance(now);
        if self.phase == Phase::Finished {
            return Err(SessionError::Gone);
        }
        let current = self.display_round();
        if self.phase == Phase::Results {
            return Err(if sub.round > current {
                SessionError::NotOpen(format!("round {} opens when the results phase ends", current + 1))
            } else {
                SessionError::StaleRound { expected: current + 1, got: sub.round }
            });
        }
        if sub.round != current {
            return Err(SessionError::StaleRound { expected: current, got: sub.round });
        }
        match self.phase {
            Phase::Deciding => {
                if sub.quarantine.is_some() {
                    return Err(SessionError::Validation("no quarantine decision is open".into()));
                }
                if let Some(a) = sub.activity {
                    if !self.needs_activity() {
                        return Err(SessionError::Validation("activity is not a decision this round".into()));
                    }
                    if a > self.cfg.activity_max {
                        return Err(SessionError::Validation(format!(
                            "activity {a} above the maximum {}",
                            self.cfg.activity_max
                        )));
                    }
                }
                if sub.tracing.is_some() && !self.needs_tracing() {
                    return Err(SessionError::Validation("tracing is not a decision this round".into()));
                }
                if sub.activity.is_none() && sub.tracing.is_none() {
                    return Err(SessionError::Validation("empty submission".into()));
                }
                self.draft.activity = sub.activity.or(self.draft.activity);
                self.draft.tracing = sub.tracing.or(self.draft.tracing);
                self.version += 1;
                if self.awaiting().is_empty() {
                    self.resolve_decisions(now, false);
                }
                Ok(())
            }
            Phase::QuarantinePrompt => {
                let Some(q) = sub.quarantine else {
                    return Err(SessionError::Validation("only the quarantine decision is open".into()));
                };
                if sub.activity.is_some() || sub.tracing.is_some() {
                    return Err(SessionError::Validation("only the quarantine decision is open".into()));
                }
                self.resolve_quarantine(now, Some(q));
                Ok(())
            }
            Phase::Results | Phase::Finished => unreachable!("handled above"),
        }
    }

    /// Close the decision phase at time `at`, filling gaps with defaults.
    fn resolve_decisions(&mut self, at: Millis, expired: bool) {
        let seat = self.seat();
        let cfg = &self.cfg;
        let agent = &self.state.agents[seat];
        let missing = self.awaiting();
        let full_miss = expired
            && !missing.is_empty()
            && self.draft.activity.is_none()
            && self.draft.tracing.is_none();
        let missed = expired && !missing.is_empty();
        let tracing = self.draft.tracing.unwrap_or(self.spec.defaults.tracing.unwrap_or(self.last_tracing));
        let activity = self.draft.activity.unwrap_or(self.spec.defaults.activity);
        let mut human = Decision::new(activity, tracing, None).coerce(cfg, agent.in_quarantine, self.state.outbreak_started);
        human.missed = missed;
        if self.needs_tracing() {
            self.last_tracing = human.tracing;
        }
        self.consecutive_misses = if full_miss { self.consecutive_misses + 1 } else { 0 };

        let decisions: Vec<Decision> = (0..cfg.group_size)
            .map(|i| {
                if i == seat {
                    human
                } else {
                    let obs = Observables::of(&self.state, i, cfg);
                    self.bots.decide(&obs, cfg, &mut self.streams.policy[i])
                }
            })
            .collect();
        let pending = self.state.begin_round(&decisions, cfg).expect("coerced decisions are legal");
        let mut answers = vec![None; cfg.group_size];
        let mut prompt = false;
        for i in pending.alerted() {
            if i == seat {
                prompt = cfg.treatment.quarantine_mode() == ProgramMode::Optional;
            } else {
                let obs = Observables::of(pending.state(), i, cfg).alerted();
                answers[i] = Some(self.bots.choose_quarantine(&obs, &mut self.streams.policy[i]));
            }
        }
        self.pending = Some((pending, answers, human));
        if prompt && self.consecutive_misses < 3 {
            self.set_phase(Phase::QuarantinePrompt, Some(at + self.spec.timers.quarantine_ms));
        } else {
            self.resolve_quarantine(at, None);
        }
    }

    fn resolve_quarantine(&mut self, at: Millis, answer: Option<bool>) {
        let (mut pending, mut answers, human) = self.pending.take().expect("a round is in flight");
        let seat = self.seat();
        let prompted = self.phase == Phase::QuarantinePrompt;
        let quarantine_missed = prompted && answer.is_none();
        let quarantine = if prompted { Some(answer.unwrap_or(self.spec.defaults.quarantine)) } else { None };
        answers[seat] = quarantine;
        if quarantine_missed {
            pending.mark_missed(seat);
        }
        let (next, record) = pending.finish(&self.cfg, |i| answers[i]).expect("engine accepts a legal round");
        let round = record.round;
        self.records.push(record);
        self.human.push(HumanRound { round, decision: human, quarantine, quarantine_missed });
        self.state = next;
        self.set_phase(Phase::Results, Some(at + self.spec.timers.results_ms));
    }

    fn next_round(&mut self, at: Millis) {
        let played = self.state.round_index - 1;
        if self.consecutive_misses >= 3 {
            self.finish_reason = Some(FinishReason::Disqualified);
            self.set_phase(Phase::Finished, None);
        } else if should_continue(played, &self.cfg, &mut self.streams.termination) {
            self.open_round(at);
        } else {
            self.finish_reason = Some(FinishReason::Completed);
            self.set_phase(Phase::Finished, None);
        }
    }

    /// The round being decided or shown, as the human numbers it.
    fn display_round(&self) -> u32 {
        match self.phase {
            Phase::Results | Phase::Finished => self.state.round_index - 1,
            _ => self.state.round_index,
        }
    }

    pub fn view(&self) -> ClientView {
        let seat = self.seat();
        let obs = Observables::of(&self.state, seat, &self.cfg);
        let last = self.records.last().map(|r| &r.agents[seat]);
        let own_rounds = || -> Vec<OwnRound> {
            self.records
                .iter()
                .map(|r| {
                    let a = &r.agents[seat];
                    OwnRound {
                        round: r.round,
                        activity: a.activity,
                        traced: a.traced,
                        alerted: a.alerted,
                        quarantined: a.quarantined,
                        infected: a.infected,
                        missed: a.missed,
                        payoff: a.payoff,
                    }
                })
                .collect()
        };
        let alerted = match self.phase {
            Phase::QuarantinePrompt => true,
            Phase::Results | Phase::Finished => last.is_some_and(|a| a.alerted),
            Phase::Deciding => false,
        };
        // results belong to the round just played; during a decision the
        // previous round's breakdown stays visible
        let breakdown = last.map(|a| PayoffBreakdown {
            activity: a.activity,
            activity_points: self.cfg.activity_benefit * a.activity as f64,
            infection_cost: if a.infected { self.cfg.infection_cost } else { 0.0 },
            penalty: if a.missed { self.cfg.missed_decision_penalty } else { 0.0 },
            total: a.payoff,
        });
        ClientView {
            schema_version: SCHEMA_VERSION,
            version: self.version,
            treatment: self.cfg.treatment,
            round_index: self.display_round(),
            phase: self.phase,
            deadline_ms: self.deadline,
            group_size: self.cfg.group_size,
            outbreak_started: self.state.outbreak_started,
            infected_count: obs.displayed_infected_count,
            last_round_mean_activity: obs.last_round_mean_activity,
            capabilities: Capabilities::of(self.cfg.treatment),
            awaiting: self.awaiting().into_iter().map(String::from).collect(),
            own: OwnView {
                quarantined: obs.in_quarantine,
                traced_last_round: last.is_some_and(|a| a.traced),
                alerted,
                cumulative_points: self.records.iter().map(|r| r.agents[seat].payoff).sum(),
                consecutive_misses: self.consecutive_misses,
                last_round: breakdown,
            },
            finish_reason: self.finish_reason,
            history: (self.phase == Phase::Finished).then(own_rounds),
        }
    }

    /// Trace rows in the batch trace format. While the game runs only the
    /// human's own rows are released; the whole group once it is over.
    pub fn trace_rows(&self) -> Vec<TraceRow> {
        let seat = self.seat();
        let all = self.phase == Phase::Finished;
        self.records
            .iter()
            .flat_map(|r| r.trace_rows(0, 0, self.cfg.treatment))
            .filter(|row| all || row.agent == seat)
            .collect()
    }
}
