use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::treatment::Treatment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRoundRecord {
    pub agent: usize,
    pub activity: u32,
    pub traced: bool,
    pub alerted: bool,
    pub exposed: bool,
    /// In quarantine during this round.
    pub quarantined: bool,
    /// Answered "yes" to an alert this round (quarantined next round).
    pub chose_quarantine: bool,
    pub infected: bool,
    pub missed: bool,
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundAggregates {
    pub mean_activity: f64,
    pub mean_activity_nonquarantined: Option<f64>,
    pub traced: usize,
    pub exposed: usize,
    pub alerted: usize,
    pub quarantined: usize,
    pub infected: usize,
    pub total_payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub agents: Vec<AgentRoundRecord>,
    pub aggregates: RoundAggregates,
}

impl RoundRecord {
    pub fn new(round: u32, agents: Vec<AgentRoundRecord>) -> Self {
        let n = agents.len().max(1) as f64;
        let free: Vec<f64> = agents
            .iter()
            .filter(|a| !a.quarantined)
            .map(|a| a.activity as f64)
            .collect();
        let aggregates = RoundAggregates {
            mean_activity: agents.iter().map(|a| a.activity as f64).sum::<f64>() / n,
            mean_activity_nonquarantined: (!free.is_empty())
                .then(|| free.iter().sum::<f64>() / free.len() as f64),
            traced: agents.iter().filter(|a| a.traced).count(),
            exposed: agents.iter().filter(|a| a.exposed).count(),
            alerted: agents.iter().filter(|a| a.alerted).count(),
            quarantined: agents.iter().filter(|a| a.quarantined).count(),
            infected: agents.iter().filter(|a| a.infected).count(),
            total_payoff: agents.iter().map(|a| a.payoff).sum(),
        };
        RoundRecord {
            round,
            agents,
            aggregates,
        }
    }

    pub fn trace_rows(
        &self,
        run_id: u64,
        group_id: u64,
        treatment: Treatment,
    ) -> impl Iterator<Item = TraceRow> + '_ {
        self.agents.iter().map(move |a| TraceRow {
            run_id,
            group_id,
            treatment,
            round: self.round,
            agent: a.agent,
            activity: a.activity,
            traced: a.traced as u8,
            alerted: a.alerted as u8,
            exposed: a.exposed as u8,
            quarantined: a.quarantined as u8,
            infected: a.infected as u8,
            payoff: a.payoff,
        })
    }
}

/// One line of a per-agent trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: u64,
    pub group_id: u64,
    pub treatment: Treatment,
    pub round: u32,
    pub agent: usize,
    pub activity: u32,
    pub traced: u8,
    pub alerted: u8,
    pub exposed: u8,
    pub quarantined: u8,
    pub infected: u8,
    pub payoff: f64,
}

pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        TraceWriter {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, row: &TraceRow) -> csv::Result<()> {
        self.inner.serialize(row)
    }

    pub fn write_round(
        &mut self,
        run_id: u64,
        group_id: u64,
        treatment: Treatment,
        rec: &RoundRecord,
    ) -> csv::Result<()> {
        for row in rec.trace_rows(run_id, group_id, treatment) {
            self.write(&row)?;
        }
        Ok(())
    }

    pub fn finish(self) -> std::io::Result<W> {
        self.inner.into_inner().map_err(|e| e.into_error())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(agent: usize, activity: u32, quarantined: bool) -> AgentRoundRecord {
        AgentRoundRecord {
            agent,
            activity,
            traced: true,
            alerted: false,
            exposed: false,
            quarantined,
            chose_quarantine: false,
            infected: quarantined,
            missed: false,
            payoff: activity as f64,
        }
    }

    #[test]
    fn aggregates() {
        let rec = RoundRecord::new(
            3,
            vec![row(0, 80, false), row(1, 0, true), row(2, 40, false)],
        );
        assert!((rec.aggregates.mean_activity - 40.0).abs() < 1e-12);
        assert_eq!(rec.aggregates.mean_activity_nonquarantined, Some(60.0));
        assert_eq!(rec.aggregates.quarantined, 1);
        assert_eq!(rec.aggregates.traced, 3);
        let all_q = RoundRecord::new(1, vec![row(0, 0, true)]);
        assert_eq!(all_q.aggregates.mean_activity_nonquarantined, None);
    }

    #[test]
    fn csv_header_and_booleans() {
        let rec = RoundRecord::new(2, vec![row(0, 80, false), row(1, 0, true)]);
        let mut w = TraceWriter::new(Vec::new());
        w.write_round(7, 1, Treatment::OM, &rec).unwrap();
        let text = String::from_utf8(w.finish().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "run_id,group_id,treatment,round,agent,activity,traced,alerted,exposed,quarantined,infected,payoff"
        );
        assert_eq!(lines.next().unwrap(), "7,1,OM,2,0,80,1,0,0,0,0,80.0");
        assert_eq!(lines.next().unwrap(), "7,1,OM,2,1,0,1,0,0,1,1,0.0");
    }
}
