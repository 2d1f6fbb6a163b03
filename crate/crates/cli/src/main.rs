//! `sisgame`: batch simulation, equilibrium tables, power analysis, trace
//! reports and the live session server.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use sisgame_core::harness::{calibration_moments, run_batch_on, BatchSpec, BlockLabel, Metric};
use sisgame_core::model::TraceWriter;
use sisgame_core::policy::{solve_all, theory_verdicts, SolverOptions};
use sisgame_core::report::{build_report, parse_trace, Series};
use sisgame_core::stats::{diff_in_diff_test, estimate_power, estimate_power_by};
use sisgame_core::{GameConfig, Treatment};

#[derive(Parser, Debug)]
#[command(name = "sisgame", version, about = "SIS economic-epidemic game simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON config file for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte Carlo batch and write per-group summaries.
    Simulate {
        /// Override the number of runs.
        #[arg(long)]
        runs: Option<usize>,
        /// Also write the per-agent round trace.
        #[arg(long)]
        traces: bool,
    },
    /// Solve the symmetric steady state of every treatment.
    Equilibrium {
        /// Print only this treatment (rankings always use all six).
        #[arg(long)]
        treatment: Option<Treatment>,
    },
    /// Estimate ideology-split power and diff-in-diff tests.
    Power {
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Turn a trace CSV into per-round series (CSV and SVG).
    Report {
        /// Trace file written by `simulate --traces`.
        trace: PathBuf,
        /// Skip the SVG charts.
        #[arg(long)]
        no_svg: bool,
    },
    /// Serve live sessions over HTTP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
}

/// Failure classes with distinct exit codes.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

/// Overrides applied to the simulation-mode game for `equilibrium`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquilibriumConfig {
    schema_version: u32,
    r0: Option<f64>,
    infection_cost: Option<f64>,
    activity_benefit: Option<f64>,
    alert_fraction: Option<f64>,
    group_size: Option<usize>,
    #[serde(default)]
    na_tracing_default: bool,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).config()?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).config()
}

fn check_schema(version: u32) -> Result<(), Failure> {
    if version != 1 {
        return Err(Failure::Config(anyhow::anyhow!("schema_version {version} not supported (expected 1)")));
    }
    Ok(())
}

fn batch_spec(g: &Global, runs: Option<usize>) -> Result<BatchSpec, Failure> {
    let mut spec: BatchSpec = match &g.config {
        Some(p) => read_json(p)?,
        None => BatchSpec::default(),
    };
    if let Some(seed) = g.seed {
        spec.master_seed = seed;
    }
    if let Some(runs) = runs {
        spec.runs = runs;
    }
    spec.validate().config()?;
    Ok(spec)
}

fn out_file(g: &Global, name: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(&g.out_dir).with_context(|| format!("creating {}", g.out_dir.display())).runtime()?;
    Ok(g.out_dir.join(name))
}

fn write_file(g: &Global, name: &str, bytes: &[u8]) -> Result<PathBuf, Failure> {
    let path = out_file(g, name)?;
    fs::write(&path, bytes).with_context(|| format!("writing {}", path.display())).runtime()?;
    Ok(path)
}

fn write_csv<T: Serialize>(g: &Global, name: &str, rows: &[T]) -> Result<PathBuf, Failure> {
    let path = out_file(g, name)?;
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display())).runtime()?;
    for r in rows {
        w.serialize(r).runtime()?;
    }
    w.flush().runtime()?;
    Ok(path)
}

fn workers(g: &Global) -> Result<Option<usize>, Failure> {
    match g.workers {
        Some(0) => Err(Failure::Config(anyhow::anyhow!("--workers must be at least 1"))),
        w => Ok(w),
    }
}

fn simulate(g: &Global, runs: Option<usize>, traces: bool) -> Result<(), Failure> {
    let mut spec = batch_spec(g, runs)?;
    spec.record_traces |= traces;
    eprintln!(
        "simulating {} runs x {} groups x {} treatments",
        spec.runs,
        spec.groups_per_run(),
        spec.treatments.len()
    );
    let out = run_batch_on(&spec, workers(g)?).runtime()?;
    let path = write_csv(g, "summaries.csv", &out.summaries)?;
    println!("wrote {} group summaries to {}", out.summaries.len(), path.display());
    if spec.record_traces {
        let path = out_file(g, "traces.csv")?;
        let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display())).runtime()?;
        let mut w = TraceWriter::new(std::io::BufWriter::new(file));
        for row in &out.traces {
            w.write(row).runtime()?;
        }
        w.finish().runtime()?;
        println!("wrote {} trace rows to {}", out.traces.len(), path.display());
    }
    let m = calibration_moments(&out.summaries).runtime()?;
    write_file(g, "moments.json", serde_json::to_string_pretty(&m).runtime()?.as_bytes())?;
    println!("treatment  groups  activity  tracing  infected  quarantined  welfare");
    for t in &m.per_treatment {
        println!(
            "{:<9}  {:>6}  {:>8.2}  {:>7.3}  {:>8.3}  {:>11.3}  {:>7.2}",
            t.treatment.to_string(),
            t.groups,
            t.group_activity.mean,
            t.tracing.mean,
            t.infected.mean,
            t.quarantined.mean,
            t.welfare.mean
        );
    }
    println!(
        "overall: activity {:.2} tracing {:.3} infection {:.3} welfare {:.2}",
        m.overall_activity, m.overall_tracing, m.overall_infection, m.overall_welfare
    );
    Ok(())
}

fn equilibrium(g: &Global, only: Option<Treatment>) -> Result<(), Failure> {
    let overrides = match &g.config {
        Some(p) => {
            let c: EquilibriumConfig = read_json(p)?;
            check_schema(c.schema_version)?;
            c
        }
        None => EquilibriumConfig { schema_version: 1, ..Default::default() },
    };
    let mut cfg = GameConfig::simulation(Treatment::OO, g.seed.unwrap_or(0));
    cfg.r0 = overrides.r0.unwrap_or(cfg.r0);
    cfg.infection_cost = overrides.infection_cost.unwrap_or(cfg.infection_cost);
    cfg.activity_benefit = overrides.activity_benefit.unwrap_or(cfg.activity_benefit);
    cfg.alert_fraction = overrides.alert_fraction.unwrap_or(cfg.alert_fraction);
    if let Some(n) = overrides.group_size {
        cfg.group_size = n;
        cfg.initial_infected = sisgame_core::config::default_initial_infected(n);
    }
    cfg.validate().config()?;
    let opts = SolverOptions { na_tracing_default: overrides.na_tracing_default, ..SolverOptions::default() };
    let solutions = solve_all(&cfg, opts).runtime()?;
    let verdicts = theory_verdicts(&solutions);

    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "treatment  activity  mean_activity  infection  quarantine  welfare  br_gap");
    for s in solutions.iter().filter(|s| only.is_none_or(|t| t == s.treatment)) {
        let _ = writeln!(
            stdout,
            "{:<9}  {:>8.3}  {:>13.3}  {:>9.4}  {:>10.4}  {:>7.2}  {:>6.1e}",
            s.treatment.to_string(),
            s.steady_activity_exact,
            s.steady_mean_activity,
            s.steady_infection_rate,
            s.steady_quarantine_share,
            s.steady_welfare_per_round,
            s.best_response_gap
        );
    }
    for (label, v) in ["activity", "infection", "welfare"].iter().zip(&verdicts) {
        let status = if v.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(stdout, "{status} {label} ranking {} (tol {})", v.ranking, v.tolerance);
        for f in &v.failures {
            let _ = writeln!(stdout, "  {f}");
        }
    }
    let shown: Vec<_> = solutions.iter().filter(|s| only.is_none_or(|t| t == s.treatment)).collect();
    let body = serde_json::json!({ "schema_version": 1, "config": cfg, "solutions": shown, "rankings": verdicts });
    write_file(g, "equilibrium.json", serde_json::to_string_pretty(&body).runtime()?.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct PowerLine {
    metric: Metric,
    treatment: Treatment,
    rejections: usize,
    trials: usize,
    power: f64,
    mean_liberal: f64,
    mean_conservative: f64,
}

#[derive(Serialize)]
struct DidLine {
    metric: Metric,
    from: Treatment,
    to: Treatment,
    gain_liberal: f64,
    gain_conservative: f64,
    rejections: usize,
    trials: usize,
    power: f64,
}

#[derive(Serialize)]
struct NullLine {
    treatment: Treatment,
    rejections: usize,
    trials: usize,
    power: f64,
}

const DID_PAIRS: [(Treatment, Treatment); 5] = [
    (Treatment::NI, Treatment::MM),
    (Treatment::OO, Treatment::OM),
    (Treatment::NI, Treatment::OO),
    (Treatment::OO, Treatment::MO),
    (Treatment::OO, Treatment::MM),
];

fn power(g: &Global, runs: Option<usize>, alpha: f64) -> Result<(), Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::Config(anyhow::anyhow!("--alpha must lie in (0, 1)")));
    }
    let spec = batch_spec(g, runs)?;
    let blocks = (BlockLabel::Liberal, BlockLabel::Conservative);
    for b in [blocks.0, blocks.1] {
        if !spec.blocks.iter().any(|x| x.label == b) {
            return Err(Failure::Config(anyhow::anyhow!("power needs a {b} block in the batch")));
        }
    }
    if spec.runs < 2 {
        return Err(Failure::Config(anyhow::anyhow!("power needs at least 2 runs")));
    }
    let rows = run_batch_on(&spec, workers(g)?).runtime()?.summaries;
    let mut lines = Vec::new();
    for metric in [Metric::Activity, Metric::Tracing, Metric::Infected, Metric::Welfare] {
        for r in estimate_power(&rows, metric, &spec.treatments, blocks, alpha).runtime()? {
            lines.push(PowerLine {
                metric,
                treatment: r.treatment,
                rejections: r.estimate.rejections,
                trials: r.estimate.trials,
                power: r.estimate.power,
                mean_liberal: r.mean_a,
                mean_conservative: r.mean_b,
            });
        }
    }
    // sanity row: two halves of the same block differ only by chance
    let halves = estimate_power_by(
        &rows,
        Metric::Welfare,
        &spec.treatments,
        |r| r.block == blocks.0 && r.group_id % 2 == 0,
        |r| r.block == blocks.0 && r.group_id % 2 == 1,
        alpha,
    );
    let null: Vec<NullLine> = match halves {
        Ok(rs) => rs
            .into_iter()
            .map(|r| NullLine { treatment: r.treatment, rejections: r.estimate.rejections, trials: r.estimate.trials, power: r.estimate.power })
            .collect(),
        // a single group per block cannot be split
        Err(_) => Vec::new(),
    };
    let mut did = Vec::new();
    for (from, to) in DID_PAIRS {
        if !(spec.treatments.contains(&from) && spec.treatments.contains(&to)) {
            continue;
        }
        let d = diff_in_diff_test(&rows, (from, to), blocks, Metric::Welfare, alpha).runtime()?;
        did.push(DidLine {
            metric: d.metric,
            from,
            to,
            gain_liberal: d.mean_gain_a,
            gain_conservative: d.mean_gain_b,
            rejections: d.estimate.rejections,
            trials: d.estimate.trials,
            power: d.estimate.power,
        });
    }
    write_csv(g, "power.csv", &lines)?;
    write_csv(g, "diff_in_diff.csv", &did)?;
    write_csv(g, "null_pairs.csv", &null)?;
    let body = serde_json::json!({
        "schema_version": 1,
        "alpha": alpha,
        "runs": spec.runs,
        "power": lines,
        "diff_in_diff": did,
        "null_pairs": null,
    });
    write_file(g, "power.json", serde_json::to_string_pretty(&body).runtime()?.as_bytes())?;
    println!("metric      treatment  power  liberal  conservative");
    for l in &lines {
        println!(
            "{:<10}  {:<9}  {:>5.2}  {:>7.3}  {:>12.3}",
            l.metric.as_str(),
            l.treatment.to_string(),
            l.power,
            l.mean_liberal,
            l.mean_conservative
        );
    }
    for n in &null {
        println!("null pair {} liberal halves welfare: rejection rate {:.3}", n.treatment, n.power);
    }
    for d in &did {
        println!(
            "diff-in-diff {}->{} welfare: gain liberal {:.2} conservative {:.2}, power {:.2}",
            d.from, d.to, d.gain_liberal, d.gain_conservative, d.power
        );
    }
    Ok(())
}

fn report(g: &Global, trace: &Path, no_svg: bool) -> Result<(), Failure> {
    let file = fs::File::open(trace).with_context(|| format!("opening {}", trace.display())).config()?;
    let rows = parse_trace(std::io::BufReader::new(file)).with_context(|| format!("parsing {}", trace.display())).config()?;
    let bundle = build_report(&rows).runtime()?;
    for s in Series::ALL {
        write_file(g, &format!("series_{}.csv", s.as_str()), bundle.to_csv(s).as_bytes())?;
        if !no_svg {
            write_file(g, &format!("series_{}.svg", s.as_str()), bundle.to_svg(s).as_bytes())?;
        }
    }
    println!("wrote {} series for {} treatments to {}", Series::ALL.len(), bundle.series.len(), g.out_dir.display());
    Ok(())
}

fn serve(bind: SocketAddr) -> Result<(), Failure> {
    let rt = tokio::runtime::Runtime::new().runtime()?;
    rt.block_on(sisgame_session::serve(bind)).with_context(|| format!("serving on {bind}")).runtime()
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    match cli.command {
        Command::Simulate { runs, traces } => simulate(g, runs, traces),
        Command::Equilibrium { treatment } => equilibrium(g, treatment),
        Command::Power { runs, alpha } => power(g, runs, alpha),
        Command::Report { trace, no_svg } => report(g, &trace, no_svg),
        Command::Serve { bind } => serve(bind),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(e) | Failure::Runtime(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
