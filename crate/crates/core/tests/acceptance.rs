//! Acceptance checks. Each criterion prints one `PASS` / `FAIL` line followed
//! by indented detail. The process fails only when a criterion outside
//! `KNOWN_GAPS` fails; known gaps still print `FAIL` and are analysed in the
//! project notes.
//!
//! `SISGAME_ACCEPTANCE_RUNS=1000` switches the Monte Carlo criteria to full
//! scale (default 200 runs).

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use sisgame_core::harness::{
    calibration_moments, run_batch, BatchSpec, BlockLabel, Endowments, IdeologyBlock, Metric, PolicySpec,
};
use sisgame_core::model::{expected_exposures, expected_exposures_raw};
use sisgame_core::policy::{rational_quarantine, rational_tracing, solve_all, theory_verdicts, Preset, RationalChoice, SolverOptions};
use sisgame_core::rng::StreamKey;
use sisgame_core::stats::{diff_in_diff_test, estimate_power, exact_u_counts, mann_whitney_u, MwMode, PowerEstimate};
use sisgame_core::treatment::ProgramMode;
use sisgame_core::{Decision, GameConfig, GroupState, Treatment};

const KNOWN_GAPS: &[&str] = &["theory rankings", "diff-in-diff direction", "statistics oracle"];

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: Vec<String>,
}

fn runs() -> usize {
    std::env::var("SISGAME_ACCEPTANCE_RUNS").ok().and_then(|s| s.parse().ok()).unwrap_or(200)
}

fn main() {
    let checks: [fn() -> Outcome; 7] = [
        worked_examples,
        theory_rankings,
        calibration,
        power_pattern,
        diff_in_diff,
        stats_oracle,
        engine_properties,
    ];
    let mut unexpected = Vec::new();
    for check in checks {
        let t0 = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let known = !o.pass && KNOWN_GAPS.contains(&o.name);
        println!(
            "{tag} {}{} [{:.1}s]",
            o.name,
            if known { " (known gap)" } else { "" },
            t0.elapsed().as_secs_f64()
        );
        for d in &o.detail {
            println!("     {d}");
        }
        if !o.pass && !known {
            unexpected.push(o.name);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected acceptance failures: {unexpected:?}");
        std::process::exit(1);
    }
}

fn worked_examples() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for (infected, quarantined, avg, raw_want, want) in [(4, 0, 80.0, 5.12, 5), (5, 2, 70.0, 2.5725, 3)] {
        let raw = expected_exposures_raw(infected, quarantined, 12, avg, 3.0).unwrap();
        let got = expected_exposures(infected, quarantined, 12, avg, 3.0).unwrap();
        let ok = (raw - raw_want).abs() < 1e-12 && got == want;
        pass &= ok;
        detail.push(format!("N=12 I={infected} Q={quarantined} avg={avg}: {raw:.4} -> {got} (want {want})"));
    }
    Outcome { name: "worked-example exactness", pass, detail }
}

fn theory_rankings() -> Outcome {
    let t0 = Instant::now();
    let cfg = GameConfig::simulation(Treatment::OO, 0);
    let solutions = solve_all(&cfg, SolverOptions::default()).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let mut detail: Vec<String> = solutions
        .iter()
        .map(|s| {
            format!(
                "{}: a*={:.3} infection={:.4} welfare={:.2} gap={:.1e}",
                s.treatment,
                s.steady_activity_exact,
                s.steady_infection_rate,
                s.steady_welfare_per_round,
                s.best_response_gap
            )
        })
        .collect();
    let mut pass = elapsed < 120.0;
    for (label, v) in ["activity", "infection", "welfare"].iter().zip(theory_verdicts(&solutions)) {
        pass &= v.pass;
        let status = if v.pass { "ok" } else { "violated" };
        detail.push(format!("{label} {} (tol {}): {status} {:?}", v.ranking, v.tolerance, v.failures));
    }
    // corner choices
    let tracing_ok = [Treatment::OO, Treatment::MO, Treatment::MM]
        .iter()
        .all(|&t| rational_tracing(t).resolve(false))
        && !rational_tracing(Treatment::OM).resolve(true)
        && rational_tracing(Treatment::NI) == RationalChoice::Unavailable;
    let quarantine_ok = [Treatment::MM, Treatment::OM].iter().all(|&t| rational_quarantine(t, true).unwrap())
        && [Treatment::OO, Treatment::MO, Treatment::NA].iter().all(|&t| !rational_quarantine(t, true).unwrap());
    pass &= tracing_ok && quarantine_ok;
    detail.push(format!("corner choices: tracing {tracing_ok}, quarantine {quarantine_ok}; solve time {elapsed:.2}s"));
    Outcome { name: "theory rankings", pass, detail }
}

fn mixed_moments(preset: Preset, runs: usize) -> (f64, f64, f64, f64) {
    let spec = BatchSpec {
        runs,
        blocks: vec![IdeologyBlock::uniform(BlockLabel::Mixed)],
        policy: PolicySpec::calibrated(preset),
        ..BatchSpec::default()
    };
    let m = calibration_moments(&run_batch(&spec).unwrap().summaries).unwrap();
    (m.overall_activity, m.overall_tracing, m.overall_infection, m.overall_welfare)
}

fn calibration() -> Outcome {
    let runs = runs();
    let band = |(a, t, i, w): (f64, f64, f64, f64)| {
        [(a - 76.6).abs() <= 5.0, (t - 0.716).abs() <= 0.05, (i - 0.264).abs() <= 0.05, (w - 36.9).abs() <= 5.0]
    };
    let mut detail = Vec::new();
    let mut pass = false;
    for preset in [Preset::ReducedRecentered, Preset::Reduced] {
        let m = mixed_moments(preset, runs);
        let ok = band(m);
        let all = ok.iter().all(|&b| b);
        if preset == Preset::ReducedRecentered {
            pass = all;
        }
        detail.push(format!(
            "{preset}{}: activity {:.2} tracing {:.3} infection {:.3} welfare {:.2} in-band {:?}",
            if preset == Preset::ReducedRecentered { " (pipeline default)" } else { " (verbatim, informational)" },
            m.0,
            m.1,
            m.2,
            m.3,
            ok
        ));
    }
    detail.push(format!("targets 76.6 / 0.716 / 0.264 / 36.9, mixed block, {runs} runs x 10 groups x 6 treatments"));
    Outcome { name: "calibration moments", pass, detail }
}

fn ideology_batch(runs: usize) -> Vec<sisgame_core::harness::SummaryRow> {
    run_batch(&BatchSpec { runs, ..BatchSpec::default() }).unwrap().summaries
}

const LIB_CONS: (BlockLabel, BlockLabel) = (BlockLabel::Liberal, BlockLabel::Conservative);

fn power_pattern() -> Outcome {
    let rows = ideology_batch(runs());
    let mut pass = true;
    let mut detail = Vec::new();
    let line = |metric: Metric, ts: &[Treatment], rule: &dyn Fn(Treatment, f64) -> bool, pass: &mut bool| {
        let res = estimate_power(&rows, metric, ts, LIB_CONS, 0.05).unwrap();
        let mut parts = Vec::new();
        for r in &res {
            let ok = rule(r.treatment, r.estimate.power);
            *pass &= ok;
            parts.push(format!("{}={:.2}{}", r.treatment, r.estimate.power, if ok { "" } else { "!" }));
        }
        format!("{}: {}", metric.as_str(), parts.join(" "))
    };
    let welfare_ts = [Treatment::OO, Treatment::OM, Treatment::MO, Treatment::NI, Treatment::MM];
    detail.push(line(
        Metric::Welfare,
        &welfare_ts,
        &|t, p| if t == Treatment::MM { p <= 0.3 } else { p >= 0.8 },
        &mut pass,
    ));
    let optional: Vec<Treatment> =
        Treatment::ALL.iter().copied().filter(|t| t.tracing_mode() == ProgramMode::Optional).collect();
    detail.push(line(Metric::Tracing, &optional, &|_, p| p >= 0.8, &mut pass));
    detail.push(line(Metric::Infected, &Treatment::ALL, &|_, p| p >= 0.8, &mut pass));
    Outcome { name: "power pattern", pass, detail }
}

fn diff_in_diff() -> Outcome {
    let rows = ideology_batch(runs());
    let mm = diff_in_diff_test(&rows, (Treatment::NI, Treatment::MM), LIB_CONS, Metric::Welfare, 0.05).unwrap();
    let om = diff_in_diff_test(&rows, (Treatment::OO, Treatment::OM), LIB_CONS, Metric::Welfare, 0.05).unwrap();
    let mm_ok = mm.mean_gain_b > mm.mean_gain_a && mm.estimate.power >= 0.8;
    let om_ok = om.estimate.power <= 0.5;
    let show = |d: &sisgame_core::stats::DiffInDiff, ok: bool| {
        format!(
            "{}->{}: gain liberal {:.2} conservative {:.2}, power {:.2} {}",
            d.from,
            d.to,
            d.mean_gain_a,
            d.mean_gain_b,
            d.estimate.power,
            if ok { "ok" } else { "violated" }
        )
    };
    Outcome { name: "diff-in-diff direction", pass: mm_ok && om_ok, detail: vec![show(&mm, mm_ok), show(&om, om_ok)] }
}

/// Two-sided p-value of `u` from the enumerated null distribution of U.
fn brute_p(n1: usize, n: usize, u_obs: usize) -> f64 {
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        let u = rank_sum - n1 * (n1 + 1) / 2;
        total += 1;
        le += u64::from(u <= u_obs);
        ge += u64::from(u >= u_obs);
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

fn split(mask: u32, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for i in 0..n {
        if mask >> i & 1 == 1 { a.push(i as f64) } else { b.push(i as f64) }
    }
    (a, b)
}

fn stats_oracle() -> Outcome {
    let mut detail = Vec::new();
    // exact vs enumeration
    let mut worst_exact: f64 = 0.0;
    let mut cases = 0;
    for n in 2..=10usize {
        for n1 in 1..n {
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != n1 {
                    continue;
                }
                let (a, b) = split(mask, n);
                let rank_sum: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
                let want = brute_p(n1, n, rank_sum - n1 * (n1 + 1) / 2);
                let got = mann_whitney_u(&a, &b, MwMode::Exact).unwrap().p_value;
                worst_exact = worst_exact.max((got - want).abs());
                cases += 1;
            }
        }
    }
    let exact_ok = worst_exact < 1e-12;
    detail.push(format!("exact vs enumeration: {cases} samples, max |dp| {worst_exact:.2e}"));

    // normal approximation at 8/8
    let (mut worst_normal, mut worst_tail): (f64, f64) = (0.0, 0.0);
    for mask in 0u32..(1 << 16) {
        if mask.count_ones() != 8 {
            continue;
        }
        let (a, b) = split(mask, 16);
        let exact = mann_whitney_u(&a, &b, MwMode::Exact).unwrap().p_value;
        let approx = mann_whitney_u(&a, &b, MwMode::NormalApprox).unwrap().p_value;
        worst_normal = worst_normal.max((exact - approx).abs());
        if exact <= 0.1 {
            worst_tail = worst_tail.max((exact - approx).abs());
        }
    }
    let normal_ok = worst_normal <= 0.01;
    detail.push(format!(
        "normal vs exact at 8/8: max |dp| {worst_normal:.4} over all 12870 splits ({worst_tail:.4} where exact p <= 0.1)"
    ));

    // size under the null, one trial per simulated run
    let counts = exact_u_counts(10, 10);
    let total: f64 = counts.iter().sum();
    let mut size = 0.0;
    for u in 0..counts.len() {
        let lower: f64 = counts[..=u].iter().sum::<f64>() / total;
        if 2.0 * lower < 0.05 {
            size = 2.0 * lower;
        }
    }
    let trials = 1000;
    let mut rng = StreamKey::root(2024).rng();
    let dist = Normal::new(0.0, 1.0).unwrap();
    let ps = (0..trials).map(|_| {
        let a: Vec<f64> = (0..10).map(|_| dist.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..10).map(|_| dist.sample(&mut rng)).collect();
        mann_whitney_u(&a, &b, MwMode::Auto).unwrap().p_value
    });
    let est = PowerEstimate::from_p_values(ps, 0.05);
    let half = 2.576 * (est.power * (1.0 - est.power) / trials as f64).sqrt();
    let null_ok = (est.power - 0.05).abs() <= half;
    detail.push(format!(
        "null rejection rate {:.4}, 99% CI [{:.4}, {:.4}] over {trials} trials of 10 vs 10 (exact size {size:.4})",
        est.power,
        est.power - half,
        est.power + half
    ));
    Outcome { name: "statistics oracle", pass: exact_ok && normal_ok && null_ok, detail }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

fn engine_properties() -> Outcome {
    const TARGET: usize = 10_000;
    let mut rng = StreamKey::root(77).rng();
    let mut rounds = 0;
    let mut groups = 0u64;
    let mut violations: Vec<String> = Vec::new();
    let mut flag = |ok: bool, what: &str, ctx: &str| {
        if !ok && violations.len() < 10 {
            violations.push(format!("{what} ({ctx})"));
        }
    };
    while rounds < TARGET {
        let t = Treatment::ALL[rng.random_range(0..6)];
        let n = rng.random_range(6..=16usize);
        let mut cfg = if rng.random_bool(0.3) {
            GameConfig::experiment(t, n, groups)
        } else {
            let mut c = GameConfig::simulation(t, groups);
            c.group_size = n;
            c.initial_infected = sisgame_core::config::default_initial_infected(n);
            c
        };
        cfg.r0 = [1.5, 3.0, 5.0][rng.random_range(0..3)];
        let seed = StreamKey::root(9).child(groups);
        let endowments = vec![Endowments::default(); n];
        let start = GroupState::new(&cfg, endowments.clone(), 76.6, seed.rng()).unwrap();
        let len = rng.random_range(5..=40u32);
        let mut state = start.clone();
        let mut script = Vec::new();
        let mut records = Vec::new();
        for _ in 0..len {
            let decisions: Vec<Decision> = state
                .agents
                .iter()
                .map(|a| {
                    let activity = if rng.random_bool(0.2) { 0 } else { rng.random_range(0..=100) };
                    let answer = [None, Some(false), Some(true)][rng.random_range(0..3)];
                    Decision::new(activity, rng.random_bool(0.6), answer).coerce(&cfg, a.in_quarantine, state.outbreak_started)
                })
                .collect();
            let ctx = format!("group {groups} {t} round {}", state.round_index);

            // independent exposure count
            let infected = state.agents.iter().filter(|a| a.is_infected()).count();
            let q_inf = state.agents.iter().filter(|a| a.is_infected() && a.in_quarantine).count();
            let mean = decisions.iter().map(|d| d.activity as f64).sum::<f64>() / n as f64;
            let raw = cfg.r0 * (infected - q_inf) as f64 / n as f64 * (n - infected) as f64 * (mean / 100.0).powi(2);
            let eligible = state.agents.iter().zip(&decisions).filter(|(a, d)| !a.is_infected() && d.activity > 0).count();
            let want_exposed = round_half_up(raw).min(eligible);

            let pending = state.begin_round(&decisions, &cfg).unwrap();
            let exposed = pending.exposed();
            let alerted = pending.alerted();
            let traced_exposed: Vec<usize> =
                exposed.iter().copied().filter(|&i| pending.state().agents[i].traced).collect();
            let answers: Vec<Option<bool>> = decisions.iter().map(|d| d.quarantine_on_alert).collect();
            let (next, rec) = pending.finish(&cfg, |i| answers[i]).unwrap();

            flag(exposed.len() == want_exposed, "exposure count", &ctx);
            let live = state.outbreak_started && t.tracing_mode() != ProgramMode::Unavailable;
            let want_alerts = if live { round_half_up(traced_exposed.len() as f64 / 3.0) } else { 0 };
            flag(alerted.len() == want_alerts, "alert count", &ctx);
            flag(alerted.iter().all(|i| traced_exposed.contains(i)), "alert outside exposed and traced", &ctx);
            flag(next.agents.len() == n, "group size", &ctx);
            let seeded = if state.outbreak_started || !next.outbreak_started { 0 } else { cfg.initial_infected };
            flag(next.infected_count() == exposed.len() + seeded, "health conservation", &ctx);
            for (i, a) in state.agents.iter().enumerate() {
                let row = &rec.agents[i];
                let nx = &next.agents[i];
                flag(!(a.is_infected() && exposed.contains(&i)), "infected agent re-exposed", &ctx);
                flag(!(a.is_infected() && nx.is_infected()), "SIS alternation", &ctx);
                flag(!(decisions[i].activity == 0 && row.exposed), "zero-activity shield", &ctx);
                flag(!nx.in_quarantine || nx.is_infected(), "quarantine without infection", &ctx);
                let want_q = alerted.contains(&i)
                    && match t.quarantine_mode() {
                        ProgramMode::Mandatory => true,
                        ProgramMode::Optional => answers[i] == Some(true),
                        ProgramMode::Unavailable => false,
                    };
                flag(nx.in_quarantine == want_q, "quarantine transition", &ctx);
                let payoff = row.activity as f64 - if row.infected { 150.0 } else { 0.0 };
                flag(row.payoff == payoff, "payoff identity", &ctx);
            }
            script.push(decisions);
            records.push(rec);
            state = next;
            rounds += 1;
        }
        // replay from the same seed
        let mut replay = GroupState::new(&cfg, endowments, 76.6, seed.rng()).unwrap();
        for (decisions, rec) in script.iter().zip(&records) {
            let (next, again) = sisgame_core::model::step_round(&replay, decisions, &cfg).unwrap();
            flag(&again == rec, "seeded replay", &format!("group {groups}"));
            replay = next;
        }
        flag(replay == state, "seeded replay final state", &format!("group {groups}"));
        groups += 1;
    }
    let pass = violations.is_empty();
    let mut detail = vec![format!("{rounds} rounds over {groups} groups, all six treatments, r0 in {{1.5, 3, 5}}")];
    detail.extend(violations);
    Outcome { name: "engine property suite", pass, detail }
}
