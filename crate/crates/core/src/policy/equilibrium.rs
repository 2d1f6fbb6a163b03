//! Symmetric steady states of the large-group approximation.
//!
//! Everyone who is free to choose plays a common activity share `a`.
//! Prevalence `i` is the positive fixed point of
//! `i = R0 (i - q) (1 - i) A^2`, where `q` is the quarantined share and `A`
//! the mean activity share, both determined by `a`, `i` and the rational
//! tracing and quarantine rules. A single agent who deviates to `x` while the
//! rest keep `a` faces infection probability `R0 (i - q) A(x) x` with
//! `A(x) = A + (x - a) / N`, and an infection costs `K`: the infection cost,
//! plus the lost round of activity when an alert forces quarantine, minus the
//! extra activity an alerted agent can grab when quarantine is optional.
//! The solution is the `a` at which the best deviation is `a` itself.

use serde::{Deserialize, Serialize};

use super::rational::{rational_quarantine, rational_tracing, RationalChoice};
use crate::config::GameConfig;
use crate::treatment::{ActivityMode, Treatment};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    pub na_tracing_default: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            na_tracing_default: true,
            max_iterations: 200,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("{treatment}: prevalence fixed point did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        treatment: Treatment,
        iterations: usize,
        residual: f64,
    },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub treatment: Treatment,
    /// Common activity, rounded to the integer grid.
    pub steady_activity: u32,
    pub steady_activity_exact: f64,
    /// Mean activity including quarantined and alerted agents.
    pub steady_mean_activity: f64,
    pub steady_infection_rate: f64,
    pub steady_quarantine_share: f64,
    pub steady_welfare_per_round: f64,
    pub tracing_choice: RationalChoice,
    pub quarantine_choice: RationalChoice,
    /// Largest payoff gain (points) from a single agent moving to any
    /// integer activity; zero at an exact equilibrium.
    pub best_response_gap: f64,
}

#[derive(Debug, Clone, Copy)]
struct Regime {
    traced: bool,
    quarantines: bool,
    games: bool,
    fixed_max: bool,
}

struct Model {
    regime: Regime,
    n: f64,
    r0: f64,
    alert: f64,
    cost: f64,
    benefit: f64,
    opts: SolverOptions,
    treatment: Treatment,
}

struct Steady {
    i: f64,
    q: f64,
    mean: f64,
}

impl Model {
    fn new(t: Treatment, cfg: &GameConfig, opts: SolverOptions) -> Self {
        let traced = rational_tracing(t).resolve(opts.na_tracing_default);
        let quarantines = rational_quarantine(t, true).unwrap_or(false);
        let fixed_max = t.activity_mode() == ActivityMode::FixedAtMax;
        Model {
            regime: Regime {
                traced,
                quarantines,
                games: traced && !quarantines && !fixed_max,
                fixed_max,
            },
            n: cfg.group_size as f64,
            r0: cfg.r0,
            alert: cfg.alert_fraction,
            cost: cfg.infection_cost,
            benefit: cfg.activity_benefit * cfg.activity_max as f64,
            opts,
            treatment: t,
        }
    }

    /// (quarantined share, mean activity share) at prevalence `i`.
    fn shares(&self, i: f64, a: f64) -> (f64, f64) {
        let r = self.regime;
        let alerted = if r.traced { self.alert * i } else { 0.0 };
        let q = if r.quarantines { alerted } else { 0.0 };
        let g = if r.games { alerted } else { 0.0 };
        (q, (1.0 - q - g) * a + g)
    }

    fn excess(&self, i: f64, a: f64) -> f64 {
        let (q, mean) = self.shares(i, a);
        self.r0 * (i - q) * (1.0 - i) * mean * mean - i
    }

    fn steady(&self, a: f64) -> Result<Steady, SolverError> {
        // largest grid point still above the diagonal brackets the stable root
        const GRID: usize = 2000;
        let top = (1..GRID)
            .rev()
            .map(|k| k as f64 / GRID as f64)
            .find(|&i| self.excess(i, a) > 0.0);
        let i = match top {
            None => 0.0,
            Some(lo) => {
                let (mut lo, mut hi) = (lo, lo + 1.0 / GRID as f64);
                let mut iterations = 0;
                while hi - lo > self.opts.tolerance {
                    if iterations == self.opts.max_iterations {
                        let mid = 0.5 * (lo + hi);
                        return Err(SolverError::NonConvergence {
                            treatment: self.treatment,
                            iterations,
                            residual: self.excess(mid, a).abs().max(hi - lo),
                        });
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.excess(mid, a) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    iterations += 1;
                }
                0.5 * (lo + hi)
            }
        };
        let (q, mean) = self.shares(i, a);
        Ok(Steady { i, q, mean })
    }

    fn infection_cost(&self, a: f64) -> f64 {
        let r = self.regime;
        let lost = self.alert * self.benefit;
        if r.traced && r.quarantines {
            self.cost + lost * a
        } else if r.games {
            self.cost - lost * (1.0 - a)
        } else {
            self.cost
        }
    }

    /// Payoff of one agent playing `x` while the others play `a`.
    fn deviation_payoff(&self, x: f64, a: f64, s: &Steady) -> f64 {
        let mean_x = s.mean + (x - a) / self.n;
        let p = self.r0 * (s.i - s.q) * mean_x * x;
        self.benefit * x - self.infection_cost(a) * p
    }

    fn best_response(&self, a: f64, s: &Steady) -> f64 {
        let c = self.infection_cost(a) * self.r0 * (s.i - s.q);
        if c <= 0.0 {
            return 1.0;
        }
        (0.5 * self.n * (self.benefit / c - (s.mean - a / self.n))).clamp(0.0, 1.0)
    }

    fn welfare(&self, s: &Steady) -> f64 {
        self.benefit * s.mean - self.cost * s.i
    }

    fn gap(&self, a: f64) -> Result<f64, SolverError> {
        let s = self.steady(a)?;
        Ok(self.best_response(a, &s) - a)
    }

    fn solution(&self, a: f64) -> Result<EquilibriumSolution, SolverError> {
        let s = self.steady(a)?;
        let here = self.deviation_payoff(a, a, &s);
        let best_dev = if self.regime.fixed_max {
            here
        } else {
            (0..=100)
                .map(|k| self.deviation_payoff(k as f64 / 100.0, a, &s))
                .fold(f64::MIN, f64::max)
        };
        let t = self.treatment;
        Ok(EquilibriumSolution {
            treatment: t,
            steady_activity: (a * 100.0).round() as u32,
            steady_activity_exact: a * 100.0,
            steady_mean_activity: s.mean * 100.0,
            steady_infection_rate: s.i,
            steady_quarantine_share: s.q,
            steady_welfare_per_round: self.welfare(&s),
            tracing_choice: rational_tracing(t),
            quarantine_choice: match t {
                Treatment::NI => RationalChoice::Unavailable,
                _ if self.regime.quarantines => RationalChoice::Yes,
                _ => RationalChoice::No,
            },
            best_response_gap: (best_dev - here).max(0.0),
        })
    }
}

/// Solve one treatment.
///
/// Scans the 101-point activity grid for sign changes of `BR(a) - a`,
/// refines each by bisection, and keeps the root with the highest welfare
/// (then the lowest activity).
pub fn solve_symmetric_steady_state(
    t: Treatment,
    cfg: &GameConfig,
    opts: SolverOptions,
) -> Result<EquilibriumSolution, SolverError> {
    cfg.validate()?;
    let m = Model::new(t, &cfg.with_treatment(t), opts);
    if m.regime.fixed_max {
        return m.solution(1.0);
    }
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
    let gaps = grid
        .iter()
        .map(|&a| m.gap(a))
        .collect::<Result<Vec<_>, _>>()?;
    let mut roots = Vec::new();
    for k in 0..grid.len() {
        if gaps[k] == 0.0 {
            roots.push(grid[k]);
        }
        if k + 1 < grid.len() && gaps[k] * gaps[k + 1] < 0.0 {
            let (mut lo, mut hi, lo_sign) = (grid[k], grid[k + 1], gaps[k].signum());
            for _ in 0..opts.max_iterations {
                if hi - lo <= opts.tolerance {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if m.gap(mid)?.signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    if roots.is_empty() {
        // no crossing on the grid: fall back to the most self-consistent point
        let k = (0..grid.len())
            .min_by(|&x, &y| gaps[x].abs().total_cmp(&gaps[y].abs()))
            .unwrap_or(0);
        roots.push(grid[k]);
    }
    let mut best: Option<EquilibriumSolution> = None;
    for a in roots {
        let sol = m.solution(a)?;
        let better = match &best {
            None => true,
            Some(b) => {
                sol.steady_welfare_per_round > b.steady_welfare_per_round + 1e-9
                    || ((sol.steady_welfare_per_round - b.steady_welfare_per_round).abs() <= 1e-9
                        && sol.steady_activity_exact < b.steady_activity_exact)
            }
        };
        if better {
            best = Some(sol);
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// All six treatments in [`Treatment::ALL`] order.
pub fn solve_all(
    cfg: &GameConfig,
    opts: SolverOptions,
) -> Result<Vec<EquilibriumSolution>, SolverError> {
    Treatment::ALL
        .iter()
        .map(|&t| solve_symmetric_steady_state(t, cfg, opts))
        .collect()
}

pub const THEORY_ACTIVITY: &str = "NA > MM > OM = NI > OO = MO";
pub const THEORY_INFECTION: &str = "NA > OO = MO > NI = OM > MM";
pub const THEORY_WELFARE: &str = "MM > OM = NI > OO = MO > NA";

/// Tie tolerances: activity points, prevalence share, welfare points.
pub const ACTIVITY_TOL: f64 = 0.5;
pub const PREVALENCE_TOL: f64 = 0.01;
pub const WELFARE_TOL: f64 = 0.5;

/// Activity, infection and welfare rankings checked against `solutions`.
pub fn theory_verdicts(solutions: &[EquilibriumSolution]) -> [RankingVerdict; 3] {
    let pick = |f: fn(&EquilibriumSolution) -> f64| -> Vec<(Treatment, f64)> {
        solutions.iter().map(|s| (s.treatment, f(s))).collect()
    };
    [
        check_ranking(
            THEORY_ACTIVITY,
            &pick(|s| s.steady_activity_exact),
            ACTIVITY_TOL,
        ),
        check_ranking(
            THEORY_INFECTION,
            &pick(|s| s.steady_infection_rate),
            PREVALENCE_TOL,
        ),
        check_ranking(
            THEORY_WELFARE,
            &pick(|s| s.steady_welfare_per_round),
            WELFARE_TOL,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingVerdict {
    pub ranking: String,
    pub tolerance: f64,
    pub pass: bool,
    /// One line per violated comparison.
    pub failures: Vec<String>,
}

/// Check values against a ranking such as `"A > B = C"`: members of a tie
/// group must lie within `tol` of each other, and every member of a group
/// must exceed every member of the next group by more than `tol`.
pub fn check_ranking(ranking: &str, values: &[(Treatment, f64)], tol: f64) -> RankingVerdict {
    let lookup = |name: &str| -> Option<(Treatment, f64)> {
        let t: Treatment = name.parse().ok()?;
        values.iter().find(|(v, _)| *v == t).copied()
    };
    let mut failures = Vec::new();
    let mut groups: Vec<Vec<(Treatment, f64)>> = Vec::new();
    for group in ranking.split('>') {
        let mut members = Vec::new();
        for name in group.split('=').map(str::trim) {
            match lookup(name) {
                Some(v) => members.push(v),
                None => failures.push(format!("no value for {name}")),
            }
        }
        groups.push(members);
    }
    for g in &groups {
        for (i, a) in g.iter().enumerate() {
            for b in &g[i + 1..] {
                if (a.1 - b.1).abs() > tol {
                    failures.push(format!(
                        "{} = {} violated: {:.4} vs {:.4}",
                        a.0, b.0, a.1, b.1
                    ));
                }
            }
        }
    }
    for pair in groups.windows(2) {
        for a in &pair[0] {
            for b in &pair[1] {
                if a.1 - b.1 <= tol {
                    failures.push(format!(
                        "{} > {} violated: {:.4} vs {:.4}",
                        a.0, b.0, a.1, b.1
                    ));
                }
            }
        }
    }
    RankingVerdict {
        ranking: ranking.to_string(),
        tolerance: tol,
        pass: failures.is_empty(),
        failures,
    }
}
