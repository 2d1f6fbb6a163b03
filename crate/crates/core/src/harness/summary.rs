use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BlockLabel, HarnessError};
use crate::model::RoundRecord;
use crate::treatment::{ActivityMode, ProgramMode, Treatment};

/// Per-group means over the rounds after the outbreak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub rounds: u32,
    pub mean_activity_nonquarantined: f64,
    pub mean_group_activity: f64,
    pub tracing_share: f64,
    pub infected_share: f64,
    pub quarantined_share: f64,
    pub welfare_per_agent_round: f64,
}

/// Summarise the rounds numbered above `skip_rounds`.
pub fn summarize(records: &[RoundRecord], skip_rounds: u32) -> GroupSummary {
    let live: Vec<&RoundRecord> = records.iter().filter(|r| r.round > skip_rounds).collect();
    let (mut n, mut free_n, mut free_sum) = (0usize, 0usize, 0.0);
    let (mut act, mut traced, mut infected, mut quarantined, mut payoff) =
        (0.0, 0usize, 0usize, 0usize, 0.0);
    for rec in &live {
        for a in &rec.agents {
            n += 1;
            act += a.activity as f64;
            traced += a.traced as usize;
            infected += a.infected as usize;
            quarantined += a.quarantined as usize;
            payoff += a.payoff;
            if !a.quarantined {
                free_n += 1;
                free_sum += a.activity as f64;
            }
        }
    }
    let per = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
    GroupSummary {
        rounds: live.len() as u32,
        mean_activity_nonquarantined: if free_n == 0 {
            0.0
        } else {
            free_sum / free_n as f64
        },
        mean_group_activity: per(act),
        tracing_share: per(traced as f64),
        infected_share: per(infected as f64),
        quarantined_share: per(quarantined as f64),
        welfare_per_agent_round: per(payoff),
    }
}

/// One line of the batch summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub run_id: u64,
    pub group_id: u64,
    pub block: BlockLabel,
    pub treatment: Treatment,
    pub rounds: u32,
    pub mean_activity_nonquarantined: f64,
    pub mean_group_activity: f64,
    pub tracing_share: f64,
    pub infected_share: f64,
    pub quarantined_share: f64,
    pub welfare_per_agent_round: f64,
}

impl SummaryRow {
    pub fn new(
        run_id: u64,
        group_id: u64,
        block: BlockLabel,
        treatment: Treatment,
        s: &GroupSummary,
    ) -> Self {
        SummaryRow {
            run_id,
            group_id,
            block,
            treatment,
            rounds: s.rounds,
            mean_activity_nonquarantined: s.mean_activity_nonquarantined,
            mean_group_activity: s.mean_group_activity,
            tracing_share: s.tracing_share,
            infected_share: s.infected_share,
            quarantined_share: s.quarantined_share,
            welfare_per_agent_round: s.welfare_per_agent_round,
        }
    }

    pub fn summary(&self) -> GroupSummary {
        GroupSummary {
            rounds: self.rounds,
            mean_activity_nonquarantined: self.mean_activity_nonquarantined,
            mean_group_activity: self.mean_group_activity,
            tracing_share: self.tracing_share,
            infected_share: self.infected_share,
            quarantined_share: self.quarantined_share,
            welfare_per_agent_round: self.welfare_per_agent_round,
        }
    }
}

/// Group-level quantity compared across ideologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Activity,
    GroupActivity,
    Tracing,
    Infected,
    Quarantined,
    Welfare,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Activity,
        Metric::GroupActivity,
        Metric::Tracing,
        Metric::Infected,
        Metric::Quarantined,
        Metric::Welfare,
    ];

    pub fn of(self, s: &SummaryRow) -> f64 {
        match self {
            Metric::Activity => s.mean_activity_nonquarantined,
            Metric::GroupActivity => s.mean_group_activity,
            Metric::Tracing => s.tracing_share,
            Metric::Infected => s.infected_share,
            Metric::Quarantined => s.quarantined_share,
            Metric::Welfare => s.welfare_per_agent_round,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Activity => "activity",
            Metric::GroupActivity => "group_activity",
            Metric::Tracing => "tracing",
            Metric::Infected => "infected",
            Metric::Quarantined => "quarantined",
            Metric::Welfare => "welfare",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricMoments {
    pub mean: f64,
    pub sd: f64,
}

impl MetricMoments {
    fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return MetricMoments {
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MetricMoments {
            mean,
            sd: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentMoments {
    pub treatment: Treatment,
    pub groups: usize,
    pub activity: MetricMoments,
    pub group_activity: MetricMoments,
    pub tracing: MetricMoments,
    pub infected: MetricMoments,
    pub quarantined: MetricMoments,
    pub welfare: MetricMoments,
}

/// Per-treatment moments plus the pooled means that correspond to the
/// experiment's overall figures: activity over treatments with free
/// activity (agents outside quarantine), tracing over treatments with
/// optional tracing, infection and welfare over everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMoments {
    pub per_treatment: Vec<TreatmentMoments>,
    pub overall_activity: f64,
    pub overall_tracing: f64,
    pub overall_infection: f64,
    pub overall_welfare: f64,
}

pub fn calibration_moments(rows: &[SummaryRow]) -> Result<CalibrationMoments, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Empty);
    }
    let mut treatments: Vec<Treatment> = rows.iter().map(|r| r.treatment).collect();
    treatments.sort();
    treatments.dedup();
    let per_treatment = treatments
        .iter()
        .map(|&t| {
            let sel: Vec<&SummaryRow> = rows.iter().filter(|r| r.treatment == t).collect();
            let m = |metric: Metric| {
                MetricMoments::of(&sel.iter().map(|r| metric.of(r)).collect::<Vec<_>>())
            };
            TreatmentMoments {
                treatment: t,
                groups: sel.len(),
                activity: m(Metric::Activity),
                group_activity: m(Metric::GroupActivity),
                tracing: m(Metric::Tracing),
                infected: m(Metric::Infected),
                quarantined: m(Metric::Quarantined),
                welfare: m(Metric::Welfare),
            }
        })
        .collect();
    let pooled = |keep: &dyn Fn(Treatment) -> bool, metric: Metric| {
        MetricMoments::of(
            &rows
                .iter()
                .filter(|r| keep(r.treatment))
                .map(|r| metric.of(r))
                .collect::<Vec<_>>(),
        )
        .mean
    };
    Ok(CalibrationMoments {
        per_treatment,
        overall_activity: pooled(
            &|t| t.activity_mode() == ActivityMode::Free,
            Metric::Activity,
        ),
        overall_tracing: pooled(
            &|t| t.tracing_mode() == ProgramMode::Optional,
            Metric::Tracing,
        ),
        overall_infection: pooled(&|_| true, Metric::Infected),
        overall_welfare: pooled(&|_| true, Metric::Welfare),
    })
}
