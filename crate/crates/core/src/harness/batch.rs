use serde::{Deserialize, Serialize};

use super::{
    sample_endowments, summarize, BlockLabel, EndowmentParams, Endowments, HarnessError,
    IdeologyBlock, SummaryRow,
};
use crate::config::GameConfig;
use crate::model::{should_continue, GroupState, RoundRecord, TraceRow};
use crate::policy::{
    solve_all, CalibratedPolicy, CoefficientSet, ConstantPolicy, DecisionProvider, Observables,
    Preset, RationalPolicy, ScriptedPolicy, SolverOptions,
};
use crate::rng::{group_key, StreamKey, ENDOWMENTS, ENGINE, POLICY, TERMINATION};
use crate::treatment::Treatment;

/// Which decision rule every simulated seat follows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    Rational {
        #[serde(default = "yes")]
        na_tracing_default: bool,
    },
    Calibrated {
        /// Shipped coefficient set; ignored when `coefficients` is given.
        #[serde(default = "default_preset")]
        preset: Preset,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        coefficients: Option<CoefficientSet>,
        /// Regression round = engine round + `round_offset`.
        #[serde(default = "default_offset")]
        round_offset: u32,
    },
    Constant {
        activity: u32,
        tracing: bool,
        quarantine: bool,
    },
    Scripted {
        steps: Vec<ConstantPolicy>,
    },
}

fn yes() -> bool {
    true
}
fn default_preset() -> Preset {
    Preset::ReducedRecentered
}
fn default_offset() -> u32 {
    5
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::calibrated(Preset::ReducedRecentered)
    }
}

impl PolicySpec {
    pub fn calibrated(preset: Preset) -> Self {
        PolicySpec::Calibrated {
            preset,
            coefficients: None,
            round_offset: 5,
        }
    }

    /// Instantiate the provider. `cfg` supplies the game parameters the
    /// rational solver needs.
    pub fn build(&self, cfg: &GameConfig) -> Result<Box<dyn DecisionProvider>, HarnessError> {
        Ok(match self {
            PolicySpec::Rational { na_tracing_default } => {
                let opts = SolverOptions {
                    na_tracing_default: *na_tracing_default,
                    ..SolverOptions::default()
                };
                let solutions = solve_all(cfg, opts)?;
                Box::new(RationalPolicy {
                    activity_max: cfg.activity_max,
                    ..RationalPolicy::new(solutions, *na_tracing_default)
                })
            }
            PolicySpec::Calibrated {
                preset,
                coefficients,
                round_offset,
            } => {
                let coeffs = match coefficients {
                    Some(c) => {
                        c.validate()?;
                        c.clone()
                    }
                    None => preset.load(),
                };
                Box::new(CalibratedPolicy {
                    activity_max: cfg.activity_max,
                    ..CalibratedPolicy::new(coeffs, *round_offset)
                })
            }
            PolicySpec::Constant {
                activity,
                tracing,
                quarantine,
            } => Box::new(ConstantPolicy {
                activity: *activity,
                tracing: *tracing,
                quarantine: *quarantine,
            }),
            PolicySpec::Scripted { steps } => {
                if steps.is_empty() {
                    return Err(HarnessError::Spec(
                        "scripted policy needs at least one step".into(),
                    ));
                }
                Box::new(ScriptedPolicy {
                    steps: steps.clone(),
                })
            }
        })
    }
}

fn default_schema() -> u32 {
    1
}
fn default_treatments() -> Vec<Treatment> {
    Treatment::ALL.to_vec()
}
fn default_blocks() -> Vec<IdeologyBlock> {
    [
        BlockLabel::Liberal,
        BlockLabel::Moderate,
        BlockLabel::Conservative,
    ]
    .map(IdeologyBlock::uniform)
    .to_vec()
}
fn default_groups() -> usize {
    10
}
fn default_runs() -> usize {
    1000
}
fn default_horizon() -> u32 {
    29
}
fn default_lag() -> f64 {
    76.6
}
fn default_policy() -> PolicySpec {
    PolicySpec::default()
}

/// A Monte Carlo design: every run draws fresh groups for each ideology
/// block and plays each group under every treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default = "default_treatments")]
    pub treatments: Vec<Treatment>,
    #[serde(default = "default_blocks")]
    pub blocks: Vec<IdeologyBlock>,
    #[serde(default = "default_groups")]
    pub groups_per_cell: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_horizon")]
    pub horizon: u32,
    #[serde(default = "default_policy")]
    pub policy: PolicySpec,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub endowments: EndowmentParams,
    /// Lagged activity every agent starts with.
    #[serde(default = "default_lag")]
    pub initial_lag_activity: f64,
    #[serde(default)]
    pub record_traces: bool,
}

impl Default for BatchSpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl BatchSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Spec(m));
        if self.schema_version != 1 {
            return bad(format!(
                "schema_version {} not supported (expected 1)",
                self.schema_version
            ));
        }
        if self.groups_per_cell == 0 {
            return bad("groups_per_cell must be at least 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.treatments.is_empty() {
            return bad("treatments must not be empty".into());
        }
        if self.blocks.is_empty() {
            return bad("blocks must not be empty".into());
        }
        for b in &self.blocks {
            b.validate().map_err(HarnessError::Spec)?;
        }
        let p = &self.endowments;
        if !(p.risk_sd > 0.0
            && p.risk_min < p.risk_max
            && (0.0..=1.0).contains(&p.prosocial_probability))
        {
            return bad("endowment parameters out of range".into());
        }
        if p.quiz_probabilities.iter().any(|w| *w < 0.0)
            || p.quiz_probabilities.iter().sum::<f64>() <= 0.0
        {
            return bad("quiz_probabilities must be non-negative with a positive sum".into());
        }
        Ok(())
    }

    /// Game parameters of every simulated group.
    pub fn game_config(&self, treatment: Treatment) -> GameConfig {
        GameConfig {
            fixed_rounds_after_outbreak: self.horizon,
            ..GameConfig::simulation(treatment, self.master_seed)
        }
    }

    pub fn groups_per_run(&self) -> usize {
        self.blocks.len() * self.groups_per_cell
    }
}

#[derive(Debug, Clone)]
pub struct GroupRun {
    pub records: Vec<RoundRecord>,
}

/// Play one group to the end of its game.
///
/// Engine, per-agent policy and termination draws come from separate
/// children of `key`, so the same key replays the same group under any
/// treatment with identical spreading draws.
pub fn run_group(
    cfg: &GameConfig,
    endowments: Vec<Endowments>,
    initial_lag_activity: f64,
    provider: &dyn DecisionProvider,
    key: StreamKey,
) -> Result<GroupRun, (u32, crate::model::ModelError)> {
    let mut state = GroupState::new(
        cfg,
        endowments,
        initial_lag_activity,
        key.child(ENGINE).rng(),
    )
    .map_err(|e| (1, e))?;
    let policy = key.child(POLICY);
    let mut rngs: Vec<_> = (0..cfg.group_size as u64)
        .map(|i| policy.child(i).rng())
        .collect();
    let mut stop = key.child(TERMINATION).rng();
    let mut records = Vec::new();
    loop {
        let round = state.round_index;
        let decisions: Vec<_> = (0..cfg.group_size)
            .map(|i| provider.decide(&Observables::of(&state, i, cfg), cfg, &mut rngs[i]))
            .collect();
        let pending = state.begin_round(&decisions, cfg).map_err(|e| (round, e))?;
        let mut answers = vec![None; cfg.group_size];
        for i in pending.alerted() {
            let obs = Observables::of(pending.state(), i, cfg).alerted();
            answers[i] = Some(provider.choose_quarantine(&obs, &mut rngs[i]));
        }
        let (next, record) = pending
            .finish(cfg, |i| answers[i])
            .map_err(|e| (round, e))?;
        records.push(record);
        if !should_continue(round, cfg, &mut stop) {
            break;
        }
        state = next;
    }
    Ok(GroupRun { records })
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutput {
    /// Sorted by (run, group, position of the treatment in the spec).
    pub summaries: Vec<SummaryRow>,
    /// Per-agent rounds, in the same order; empty unless requested.
    pub traces: Vec<TraceRow>,
}

struct Cell {
    run: u64,
    group: u64,
    block: usize,
}

fn run_cell(
    spec: &BatchSpec,
    providers: &[Box<dyn DecisionProvider>],
    cell: &Cell,
) -> Result<(Vec<SummaryRow>, Vec<TraceRow>), HarnessError> {
    let key = group_key(spec.master_seed, cell.run, cell.group);
    let block = &spec.blocks[cell.block];
    let mut erng = key.child(ENDOWMENTS).rng();
    let cfg0 = spec.game_config(spec.treatments[0]);
    let endowments: Vec<Endowments> = (0..cfg0.group_size)
        .map(|_| sample_endowments(block, &spec.endowments, &mut erng))
        .collect();
    let mut rows = Vec::with_capacity(spec.treatments.len());
    let mut traces = Vec::new();
    for (&t, provider) in spec.treatments.iter().zip(providers) {
        let cfg = spec.game_config(t);
        let run = run_group(
            &cfg,
            endowments.clone(),
            spec.initial_lag_activity,
            provider.as_ref(),
            key,
        )
        .map_err(|(round, source)| HarnessError::Engine {
            run: cell.run,
            group: cell.group,
            treatment: t,
            round,
            source,
        })?;
        let summary = summarize(&run.records, cfg.safe_rounds);
        rows.push(SummaryRow::new(
            cell.run,
            cell.group,
            block.label,
            t,
            &summary,
        ));
        if spec.record_traces {
            for rec in &run.records {
                traces.extend(rec.trace_rows(cell.run, cell.group, t));
            }
        }
    }
    Ok((rows, traces))
}

/// Run a batch on the default worker pool.
pub fn run_batch(spec: &BatchSpec) -> Result<BatchOutput, HarnessError> {
    run_batch_on(spec, None)
}

/// Run a batch with `workers` threads (`None`: rayon's default). Output is
/// identical for every worker count and to [`run_batch_sequential`].
pub fn run_batch_on(spec: &BatchSpec, workers: Option<usize>) -> Result<BatchOutput, HarnessError> {
    run_with(spec, |cells, f| execute(cells, workers, f))
}

/// Run every cell on the calling thread.
pub fn run_batch_sequential(spec: &BatchSpec) -> Result<BatchOutput, HarnessError> {
    run_with(spec, |cells, f| cells.iter().map(f).collect())
}

type CellOutput = (Vec<SummaryRow>, Vec<TraceRow>);
type CellResult = Result<CellOutput, HarnessError>;

fn run_with<E>(spec: &BatchSpec, exec: E) -> Result<BatchOutput, HarnessError>
where
    E: FnOnce(
        &[Cell],
        &(dyn Fn(&Cell) -> CellResult + Sync),
    ) -> Result<Vec<CellOutput>, HarnessError>,
{
    spec.validate()?;
    let providers = spec
        .treatments
        .iter()
        .map(|&t| spec.policy.build(&spec.game_config(t)))
        .collect::<Result<Vec<_>, _>>()?;
    let per_run = spec.groups_per_run();
    let cells: Vec<Cell> = (0..spec.runs * per_run)
        .map(|k| Cell {
            run: (k / per_run) as u64,
            group: (k % per_run) as u64,
            block: (k % per_run) / spec.groups_per_cell,
        })
        .collect();
    let results = exec(&cells, &|c| run_cell(spec, &providers, c))?;
    let mut out = BatchOutput::default();
    for (rows, traces) in results {
        out.summaries.extend(rows);
        out.traces.extend(traces);
    }
    Ok(out)
}

#[cfg(feature = "parallel")]
fn execute(
    cells: &[Cell],
    workers: Option<usize>,
    f: &(dyn Fn(&Cell) -> CellResult + Sync),
) -> Result<Vec<CellOutput>, HarnessError> {
    use rayon::prelude::*;
    let go = || cells.par_iter().map(f).collect::<Result<Vec<_>, _>>();
    match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| HarnessError::Spec(format!("worker pool: {e}")))?
            .install(go),
        None => go(),
    }
}

#[cfg(not(feature = "parallel"))]
fn execute(
    cells: &[Cell],
    _workers: Option<usize>,
    f: &(dyn Fn(&Cell) -> CellResult + Sync),
) -> Result<Vec<CellOutput>, HarnessError> {
    cells.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_matches_design() {
        let spec = BatchSpec::default();
        assert_eq!(spec.groups_per_run() * spec.treatments.len(), 180);
        assert_eq!(spec.runs, 1000);
        assert_eq!(spec.horizon, 29);
        assert_eq!(spec.game_config(Treatment::OO).initial_infected, 4);
        spec.validate().unwrap();
    }

    #[test]
    fn spec_json_rejects_unknown_keys() {
        assert!(serde_json::from_str::<BatchSpec>(r#"{"runs": 2, "bogus": 1}"#).is_err());
        let spec: BatchSpec = serde_json::from_str(r#"{"runs": 2, "policy": {"kind": "constant", "activity": 50, "tracing": true, "quarantine": false}}"#).unwrap();
        assert_eq!(spec.runs, 2);
        let bad: BatchSpec = serde_json::from_str(r#"{"groups_per_cell": 0}"#).unwrap();
        assert!(bad.validate().is_err());
    }
}
