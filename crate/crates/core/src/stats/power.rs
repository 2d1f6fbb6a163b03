use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{mann_whitney_u, MwMode, StatsError, TestResult};
use crate::harness::{BlockLabel, Metric, SummaryRow};
use crate::treatment::Treatment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub rejections: usize,
    pub trials: usize,
    pub power: f64,
    pub alpha: f64,
}

impl PowerEstimate {
    pub fn from_p_values(ps: impl IntoIterator<Item = f64>, alpha: f64) -> Self {
        let (mut rejections, mut trials) = (0, 0);
        for p in ps {
            trials += 1;
            rejections += usize::from(p < alpha);
        }
        let power = if trials == 0 {
            0.0
        } else {
            rejections as f64 / trials as f64
        };
        PowerEstimate {
            rejections,
            trials,
            power,
            alpha,
        }
    }
}

/// Power of the ideology comparison in one treatment, with the mean of the
/// per-run group means on each side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub treatment: Treatment,
    pub metric: Metric,
    pub estimate: PowerEstimate,
    pub mean_a: f64,
    pub mean_b: f64,
}

fn runs_of(rows: &[SummaryRow]) -> Vec<u64> {
    let mut runs: Vec<u64> = rows.iter().map(|r| r.run_id).collect();
    runs.sort_unstable();
    runs.dedup();
    runs
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Per run and treatment, compare the group means selected by `side_a`
/// against those selected by `side_b` with a two-sided MW test.
pub fn estimate_power_by<A, B>(
    rows: &[SummaryRow],
    metric: Metric,
    treatments: &[Treatment],
    side_a: A,
    side_b: B,
    alpha: f64,
) -> Result<Vec<PowerRow>, StatsError>
where
    A: Fn(&SummaryRow) -> bool,
    B: Fn(&SummaryRow) -> bool,
{
    let runs = runs_of(rows);
    if runs.len() < 2 {
        return Err(StatsError::TooFew {
            needed: 2,
            got: runs.len(),
        });
    }
    let mut cells: HashMap<(u64, Treatment, bool), Vec<f64>> = HashMap::new();
    for r in rows {
        for (side, pick) in [(true, side_a(r)), (false, side_b(r))] {
            if pick {
                cells
                    .entry((r.run_id, r.treatment, side))
                    .or_default()
                    .push(metric.of(r));
            }
        }
    }
    let mut out = Vec::new();
    for &t in treatments {
        let mut ps = Vec::with_capacity(runs.len());
        let (mut sum_a, mut sum_b) = (0.0, 0.0);
        for &run in &runs {
            let get = |side: bool| {
                cells.get(&(run, t, side)).ok_or_else(|| {
                    StatsError::MissingCell(format!(
                        "run {run}, {t}, side {}",
                        if side { "a" } else { "b" }
                    ))
                })
            };
            let (a, b) = (get(true)?, get(false)?);
            sum_a += mean(a);
            sum_b += mean(b);
            ps.push(mann_whitney_u(a, b, MwMode::Auto)?.p_value);
        }
        let n = runs.len() as f64;
        out.push(PowerRow {
            treatment: t,
            metric,
            estimate: PowerEstimate::from_p_values(ps, alpha),
            mean_a: sum_a / n,
            mean_b: sum_b / n,
        });
    }
    Ok(out)
}

/// Ideology-block comparison, the usual use of [`estimate_power_by`].
pub fn estimate_power(
    rows: &[SummaryRow],
    metric: Metric,
    treatments: &[Treatment],
    blocks: (BlockLabel, BlockLabel),
    alpha: f64,
) -> Result<Vec<PowerRow>, StatsError> {
    estimate_power_by(
        rows,
        metric,
        treatments,
        |r| r.block == blocks.0,
        |r| r.block == blocks.1,
        alpha,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffInDiff {
    pub from: Treatment,
    pub to: Treatment,
    pub metric: Metric,
    pub blocks: (BlockLabel, BlockLabel),
    pub per_run: Vec<TestResult>,
    pub estimate: PowerEstimate,
    /// Mean gain `metric(to) - metric(from)` of each block's groups.
    pub mean_gain_a: f64,
    pub mean_gain_b: f64,
}

/// For every run, take each group's change in `metric` from `from` to
/// `to`, then compare the two blocks' changes with a two-sided MW test.
pub fn diff_in_diff_test(
    rows: &[SummaryRow],
    (from, to): (Treatment, Treatment),
    blocks: (BlockLabel, BlockLabel),
    metric: Metric,
    alpha: f64,
) -> Result<DiffInDiff, StatsError> {
    let mut by_group: HashMap<(u64, u64, Treatment), &SummaryRow> = HashMap::new();
    for r in rows {
        by_group.insert((r.run_id, r.group_id, r.treatment), r);
    }
    // run -> (gains of block a, gains of block b)
    let mut gains: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.treatment == from) {
        let side_a = r.block == blocks.0;
        if !side_a && r.block != blocks.1 {
            continue;
        }
        let other = by_group.get(&(r.run_id, r.group_id, to)).ok_or_else(|| {
            StatsError::Unpaired(format!(
                "run {}, group {} has no {to} row",
                r.run_id, r.group_id
            ))
        })?;
        let gain = metric.of(other) - metric.of(r);
        let entry = gains.entry(r.run_id).or_default();
        if side_a {
            entry.0.push(gain);
        } else {
            entry.1.push(gain);
        }
    }
    if gains.is_empty() {
        return Err(StatsError::MissingCell(format!(
            "no {from} rows for the requested blocks"
        )));
    }
    let mut per_run = Vec::with_capacity(gains.len());
    let (mut sum_a, mut sum_b) = (0.0, 0.0);
    for (run, (a, b)) in &gains {
        if a.is_empty() || b.is_empty() {
            return Err(StatsError::MissingCell(format!(
                "run {run}: one block has no groups"
            )));
        }
        sum_a += mean(a);
        sum_b += mean(b);
        per_run.push(mann_whitney_u(a, b, MwMode::Auto)?);
    }
    let n = gains.len() as f64;
    Ok(DiffInDiff {
        from,
        to,
        metric,
        blocks,
        estimate: PowerEstimate::from_p_values(per_run.iter().map(|r| r.p_value), alpha),
        per_run,
        mean_gain_a: sum_a / n,
        mean_gain_b: sum_b / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: u64, group: u64, block: BlockLabel, t: Treatment, welfare: f64) -> SummaryRow {
        SummaryRow {
            run_id: run,
            group_id: group,
            block,
            treatment: t,
            rounds: 29,
            mean_activity_nonquarantined: 0.0,
            mean_group_activity: 0.0,
            tracing_share: 0.0,
            infected_share: 0.0,
            quarantined_share: 0.0,
            welfare_per_agent_round: welfare,
        }
    }

    #[test]
    fn separated_blocks_always_reject() {
        let mut rows = Vec::new();
        for run in 0..5 {
            for g in 0..10 {
                rows.push(row(
                    run,
                    g,
                    BlockLabel::Liberal,
                    Treatment::OO,
                    50.0 + g as f64,
                ));
                rows.push(row(
                    run,
                    10 + g,
                    BlockLabel::Conservative,
                    Treatment::OO,
                    10.0 + g as f64,
                ));
            }
        }
        let p = estimate_power(
            &rows,
            Metric::Welfare,
            &[Treatment::OO],
            (BlockLabel::Liberal, BlockLabel::Conservative),
            0.05,
        )
        .unwrap();
        assert_eq!(p[0].estimate.power, 1.0);
        assert_eq!(p[0].estimate.trials, 5);
        assert!(p[0].mean_a > p[0].mean_b);
        let missing = estimate_power(
            &rows,
            Metric::Welfare,
            &[Treatment::MM],
            (BlockLabel::Liberal, BlockLabel::Conservative),
            0.05,
        );
        assert!(matches!(missing, Err(StatsError::MissingCell(_))));
    }

    #[test]
    fn same_treatment_diff_is_null() {
        let mut rows = Vec::new();
        for run in 0..3 {
            for g in 0..6 {
                rows.push(row(run, g, BlockLabel::Liberal, Treatment::NI, g as f64));
                rows.push(row(
                    run,
                    6 + g,
                    BlockLabel::Conservative,
                    Treatment::NI,
                    2.0 * g as f64,
                ));
            }
        }
        let d = diff_in_diff_test(
            &rows,
            (Treatment::NI, Treatment::NI),
            (BlockLabel::Liberal, BlockLabel::Conservative),
            Metric::Welfare,
            0.05,
        )
        .unwrap();
        assert_eq!(d.estimate.rejections, 0);
        assert!(d.per_run.iter().all(|r| r.p_value == 1.0));
        let unpaired = diff_in_diff_test(
            &rows,
            (Treatment::NI, Treatment::MM),
            (BlockLabel::Liberal, BlockLabel::Conservative),
            Metric::Welfare,
            0.05,
        );
        assert!(matches!(unpaired, Err(StatsError::Unpaired(_))));
    }

    #[test]
    fn power_counts() {
        let e = PowerEstimate::from_p_values([0.01, 0.2, 0.049, 0.05], 0.05);
        assert_eq!((e.rejections, e.trials), (2, 4));
        assert_eq!(e.power, 0.5);
    }
}
