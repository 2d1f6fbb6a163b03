//! Per-round treatment means from a trace, as CSV tables and SVG charts.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::harness::GroupSummary;
use crate::model::TraceRow;
use crate::treatment::Treatment;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("trace line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("trace has no rows")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Read a trace CSV, reporting the line of the first bad row.
pub fn parse_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, ReportError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| ReportError::Malformed {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ReportError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: TraceRow =
            record
                .deserialize(Some(&headers))
                .map_err(|e| ReportError::Malformed {
                    line,
                    message: e.to_string(),
                })?;
        for (name, v) in [
            ("traced", row.traced),
            ("alerted", row.alerted),
            ("exposed", row.exposed),
            ("quarantined", row.quarantined),
            ("infected", row.infected),
        ] {
            if v > 1 {
                return Err(ReportError::Malformed {
                    line,
                    message: format!("{name} must be 0 or 1, got {v}"),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Activity,
    Tracing,
    Infected,
    Quarantined,
    Welfare,
}

impl Series {
    pub const ALL: [Series; 5] = [
        Series::Activity,
        Series::Tracing,
        Series::Infected,
        Series::Quarantined,
        Series::Welfare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Series::Activity => "activity",
            Series::Tracing => "tracing",
            Series::Infected => "infected",
            Series::Quarantined => "quarantined",
            Series::Welfare => "welfare",
        }
    }

    fn is_share(self) -> bool {
        matches!(
            self,
            Series::Tracing | Series::Infected | Series::Quarantined
        )
    }
}

/// Means over every agent of every group in one treatment and round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundPoint {
    pub round: u32,
    pub observations: usize,
    pub activity: f64,
    pub tracing: f64,
    pub infected: f64,
    pub quarantined: f64,
    pub welfare: f64,
}

impl RoundPoint {
    pub fn get(&self, s: Series) -> f64 {
        match s {
            Series::Activity => self.activity,
            Series::Tracing => self.tracing,
            Series::Infected => self.infected,
            Series::Quarantined => self.quarantined,
            Series::Welfare => self.welfare,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSeries {
    pub treatment: Treatment,
    pub points: Vec<RoundPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub series: Vec<TreatmentSeries>,
}

type GroupId = (u64, u64, Treatment);

/// First round in which each group has an infected agent.
fn outbreak_rounds(rows: &[TraceRow]) -> HashMap<GroupId, u32> {
    let mut first: HashMap<GroupId, u32> = HashMap::new();
    for r in rows.iter().filter(|r| r.infected == 1) {
        let e = first
            .entry((r.run_id, r.group_id, r.treatment))
            .or_insert(r.round);
        *e = (*e).min(r.round);
    }
    first
}

fn live_rows(rows: &[TraceRow]) -> impl Iterator<Item = &TraceRow> {
    let start = outbreak_rounds(rows);
    rows.iter().filter(move |r| {
        start
            .get(&(r.run_id, r.group_id, r.treatment))
            .is_some_and(|&s| r.round >= s)
    })
}

#[derive(Default)]
struct Acc {
    n: usize,
    activity: f64,
    free_n: usize,
    free_activity: f64,
    traced: f64,
    infected: f64,
    quarantined: f64,
    payoff: f64,
}

impl Acc {
    fn add(&mut self, r: &TraceRow) {
        self.n += 1;
        self.activity += r.activity as f64;
        if r.quarantined == 0 {
            self.free_n += 1;
            self.free_activity += r.activity as f64;
        }
        self.traced += r.traced as f64;
        self.infected += r.infected as f64;
        self.quarantined += r.quarantined as f64;
        self.payoff += r.payoff;
    }
}

/// Per-treatment, per-round means. Rounds before a group's outbreak are
/// left out, as are groups in which no one is ever infected.
pub fn build_report(rows: &[TraceRow]) -> Result<ReportBundle, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut acc: BTreeMap<(Treatment, u32), Acc> = BTreeMap::new();
    for r in live_rows(rows) {
        acc.entry((r.treatment, r.round)).or_default().add(r);
    }
    let mut series: Vec<TreatmentSeries> = Vec::new();
    for ((t, round), a) in acc {
        let n = a.n as f64;
        let point = RoundPoint {
            round,
            observations: a.n,
            activity: a.activity / n,
            tracing: a.traced / n,
            infected: a.infected / n,
            quarantined: a.quarantined / n,
            welfare: a.payoff / n,
        };
        match series.last_mut() {
            Some(s) if s.treatment == t => s.points.push(point),
            _ => series.push(TreatmentSeries {
                treatment: t,
                points: vec![point],
            }),
        }
    }
    Ok(ReportBundle { series })
}

/// Group summaries recomputed from a trace, keyed by (run, group,
/// treatment); they match the harness's own summaries.
pub fn summaries_from_trace(rows: &[TraceRow]) -> BTreeMap<(u64, u64, Treatment), GroupSummary> {
    let mut acc: BTreeMap<GroupId, (Acc, std::collections::BTreeSet<u32>)> = BTreeMap::new();
    for r in live_rows(rows) {
        let e = acc.entry((r.run_id, r.group_id, r.treatment)).or_default();
        e.0.add(r);
        e.1.insert(r.round);
    }
    acc.into_iter()
        .map(|(k, (a, rounds))| {
            let n = a.n as f64;
            (
                k,
                GroupSummary {
                    rounds: rounds.len() as u32,
                    mean_activity_nonquarantined: if a.free_n == 0 {
                        0.0
                    } else {
                        a.free_activity / a.free_n as f64
                    },
                    mean_group_activity: a.activity / n,
                    tracing_share: a.traced / n,
                    infected_share: a.infected / n,
                    quarantined_share: a.quarantined / n,
                    welfare_per_agent_round: a.payoff / n,
                },
            )
        })
        .collect()
}

impl ReportBundle {
    /// Wide table: one row per round, one column per treatment.
    pub fn to_csv(&self, s: Series) -> String {
        let rounds: std::collections::BTreeSet<u32> = self
            .series
            .iter()
            .flat_map(|t| t.points.iter().map(|p| p.round))
            .collect();
        let mut out = String::from("round");
        for t in &self.series {
            let _ = write!(out, ",{}", t.treatment);
        }
        out.push('\n');
        for round in rounds {
            let _ = write!(out, "{round}");
            for t in &self.series {
                match t.points.iter().find(|p| p.round == round) {
                    Some(p) => {
                        let _ = write!(out, ",{}", p.get(s));
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    /// Line chart of one series, one line per treatment.
    pub fn to_svg(&self, s: Series) -> String {
        const W: f64 = 640.0;
        const H: f64 = 360.0;
        const M: f64 = 48.0;
        const COLORS: [&str; 6] = [
            "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02",
        ];
        let points: Vec<&RoundPoint> = self.series.iter().flat_map(|t| &t.points).collect();
        let (rmin, rmax) = points.iter().fold((u32::MAX, 0), |(lo, hi), p| {
            (lo.min(p.round), hi.max(p.round))
        });
        let (mut vmin, mut vmax) = if s.is_share() {
            (0.0, 1.0)
        } else {
            points.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| {
                (lo.min(p.get(s)), hi.max(p.get(s)))
            })
        };
        if vmax - vmin < 1e-9 {
            vmin -= 1.0;
            vmax += 1.0;
        }
        let span_r = (rmax.saturating_sub(rmin)).max(1) as f64;
        let x = |r: u32| M + (r - rmin) as f64 / span_r * (W - 2.0 * M);
        let y = |v: f64| H - M - (v - vmin) / (vmax - vmin) * (H - 2.0 * M);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n"
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
            W / 2.0,
            s.as_str()
        );
        let _ = writeln!(
            svg,
            "<path d=\"M{M} {M} V{b} H{r}\" fill=\"none\" stroke=\"#333\"/>",
            b = H - M,
            r = W - M
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2}</text>",
            M - 4.0,
            y(vmax) + 4.0,
            vmax
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2}</text>",
            M - 4.0,
            y(vmin) + 4.0,
            vmin
        );
        let _ = writeln!(
            svg,
            "<text x=\"{M}\" y=\"{}\">round {rmin}</text>",
            H - M + 16.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">round {rmax}</text>",
            W - M,
            H - M + 16.0
        );
        for (k, t) in self.series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<String> = t
                .points
                .iter()
                .map(|p| format!("{:.1},{:.1}", x(p.round), y(p.get(s))))
                .collect();
            if pts.len() == 1 {
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>",
                    x(t.points[0].round),
                    y(t.points[0].get(s))
                );
            } else {
                let _ = writeln!(svg, "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>", pts.join(" "));
            }
            let _ = writeln!(
                svg,
                "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
                W - M + 6.0,
                M + 14.0 * k as f64,
                t.treatment
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
