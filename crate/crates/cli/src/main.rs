//! `swarm-opt` experiment runner.
//!
//! Exit status is 0 on success, 1 when a run or an oracle fails and 2 when
//! the spec or the command line is invalid.

mod plot;
mod spec;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarm_opt::netsim::{compute_metrics, run, write_metrics_csv, MetricsRow, RoundTrace};
use swarm_opt::oracle::{FixtureStore, OracleSolution};
use swarm_opt::problems::{AggregateTerm, Problem};
use swarm_opt::{Error, Vector};

use plot::{line_chart, Scale, Series};
use spec::ExperimentSpec;

#[derive(Parser)]
#[command(name = "swarm-opt", version, about = "Distributed optimization experiments for robot teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm on every seed and write metrics and plots.
    Run(CommonArgs),
    /// Solve the centralized problems of a spec and store the fixtures.
    Oracle(CommonArgs),
    /// Write the aggregate trajectory minus its budget for aggregative runs.
    SigmaTrace(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory; overrides the spec's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
    /// Oracle fixture directory; defaults to `<out>/fixtures`.
    #[arg(long, env = "SWARMOPT_FIXTURES")]
    fixtures_dir: Option<PathBuf>,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

struct Context {
    spec: ExperimentSpec,
    out: PathBuf,
    store: FixtureStore,
    quiet: bool,
}

impl Context {
    fn new(args: &CommonArgs) -> Result<Self, Failure> {
        let text = fs::read_to_string(&args.spec)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", args.spec.display())))?;
        let spec = ExperimentSpec::from_json(&text)?;
        let out = args
            .out
            .clone()
            .or_else(|| spec.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
        let fixtures = args.fixtures_dir.clone().unwrap_or_else(|| out.join("fixtures"));
        Ok(Context { spec, out, store: FixtureStore::new(fixtures), quiet: args.quiet })
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|e| io_failure(&path, e))
    }

    /// Problem and oracle of every seed.
    fn instances(&self) -> Result<Vec<(u64, Problem, OracleSolution)>, Failure> {
        self.spec
            .seeds
            .iter()
            .map(|&seed| {
                let problem = self.spec.scenario.build(seed).map_err(runtime)?;
                let (sol, cached) = self.store.load_or_solve(&problem).map_err(runtime)?;
                let hash = &sol.problem_hash[..12];
                self.say(format!(
                    "seed {seed}: {} oracle {hash} ({}, residual {:e})",
                    if cached { "cached" } else { "solved" },
                    sol.method,
                    sol.residual
                ));
                Ok((seed, problem, sol))
            })
            .collect()
    }

    fn trace(&self, alg_index: usize, seed: u64, problem: &Problem) -> swarm_opt::Result<Vec<RoundTrace>> {
        let topo = self.spec.topology.build(problem.n_robots(), seed)?;
        let cfg = self.spec.run_config(&self.spec.algorithms[alg_index], topo);
        Ok(run(problem, &cfg)?.trace)
    }
}

/// Solver and engine failures past validation are runtime failures.
fn runtime(e: Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn metrics_bytes(rows: &[MetricsRow]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write_metrics_csv(rows, &mut buf).map_err(runtime)?;
    Ok(buf)
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Per-round maximum across seeds.
fn aggregate(runs: &[Vec<MetricsRow>]) -> Vec<MetricsRow> {
    let mut by_t: BTreeMap<usize, MetricsRow> = BTreeMap::new();
    for row in runs.iter().flatten() {
        by_t.entry(row.t)
            .and_modify(|m| {
                m.cost_error = max_opt(m.cost_error, row.cost_error);
                m.coupling_violation = m.coupling_violation.max(row.coupling_violation);
                m.consensus_error = m.consensus_error.max(row.consensus_error);
                m.opt_error = max_opt(m.opt_error, row.opt_error);
            })
            .or_insert_with(|| row.clone());
    }
    by_t.into_values().collect()
}

fn cmd_run(args: &CommonArgs) -> Result<(), Failure> {
    let ctx = Context::new(args)?;
    let instances = ctx.instances()?;
    let mut curves: Vec<(String, Vec<MetricsRow>)> = Vec::new();
    let mut failed = Vec::new();
    for (k, alg) in ctx.spec.algorithms.iter().enumerate() {
        let name = alg.name();
        let mut runs = Vec::new();
        for (seed, problem, sol) in &instances {
            match ctx.trace(k, *seed, problem) {
                Ok(trace) => {
                    let rows = compute_metrics(&trace, problem, Some(sol)).map_err(runtime)?;
                    ctx.write(&format!("{name}_seed{seed}.csv"), &metrics_bytes(&rows)?)?;
                    if let Some(last) = rows.last() {
                        ctx.say(format!(
                            "{name} seed {seed}: t={} cost_error={} violation={:e} opt_error={}",
                            last.t,
                            last.cost_error.map_or("-".into(), |v| format!("{v:e}")),
                            last.coupling_violation,
                            last.opt_error.map_or("-".into(), |v| format!("{v:e}")),
                        ));
                    }
                    runs.push(rows);
                }
                Err(e) => {
                    eprintln!("{name} seed {seed}: {e}");
                    failed.push(format!("{name} seed {seed}"));
                }
            }
        }
        let agg = aggregate(&runs);
        ctx.write(&format!("{name}_max.csv"), &metrics_bytes(&agg)?)?;
        curves.push((name.to_string(), agg));
    }

    let series = |pick: fn(&MetricsRow) -> Option<f64>| -> Vec<Series> {
        curves
            .iter()
            .map(|(label, rows)| Series {
                label: label.clone(),
                points: rows.iter().filter_map(|r| pick(r).map(|v| (r.t as f64, v))).collect(),
            })
            .collect()
    };
    let seeds = ctx.spec.seeds.len();
    let suffix = if seeds > 1 { format!(" (max over {seeds} seeds)") } else { String::new() };
    let aggregative = matches!(instances[0].1, Problem::Aggregative(_));
    let charts: Vec<(&str, &str, fn(&MetricsRow) -> Option<f64>)> = if aggregative {
        vec![("opt_error", "relative optimality error", |r| r.opt_error)]
    } else {
        vec![
            ("cost_error", "relative cost error", |r| r.cost_error),
            ("coupling_violation", "coupling violation", |r| Some(r.coupling_violation)),
        ]
    };
    for (file, title, pick) in charts {
        let svg = line_chart(&format!("{title}{suffix}"), "t", file, Scale::Log, &series(pick));
        ctx.write(&format!("{file}.svg"), svg.as_bytes())?;
    }
    ctx.say(format!("outputs in {}", ctx.out.display()));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("failed runs: {}", failed.join(", "))))
    }
}

fn cmd_oracle(args: &CommonArgs) -> Result<(), Failure> {
    let ctx = Context::new(args)?;
    let instances = ctx.instances()?;
    ctx.say(format!("{} fixtures in {}", instances.len(), ctx.store.dir().display()));
    Ok(())
}

/// Reference the aggregate is compared against: the budget of an
/// exponential penalty or the target of a squared distance.
fn budget(problem: &Problem) -> Option<Vector> {
    match problem {
        Problem::Aggregative(p) => Some(match &p.term {
            AggregateTerm::ExpShifted { shift } => Vector::from_element(1, *shift),
            AggregateTerm::SquaredDistance { target } => target.clone(),
        }),
        _ => None,
    }
}

fn cmd_sigma_trace(args: &CommonArgs) -> Result<(), Failure> {
    let ctx = Context::new(args)?;
    let probe = ctx.spec.scenario.build(ctx.spec.seeds[0]).map_err(runtime)?;
    if budget(&probe).is_none() {
        return Err(Failure::Invalid(format!(
            "sigma-trace needs an aggregative scenario, got {}",
            ctx.spec.scenario.tag()
        )));
    }
    let mut curves = Vec::new();
    let mut failed = Vec::new();
    let mut positive = false;
    for (k, alg) in ctx.spec.algorithms.iter().enumerate() {
        let name = alg.name();
        for (j, &seed) in ctx.spec.seeds.iter().enumerate() {
            let problem = ctx.spec.scenario.build(seed).map_err(runtime)?;
            let b = budget(&problem).unwrap_or_default();
            let trace = match ctx.trace(k, seed, &problem) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{name} seed {seed}: {e}");
                    failed.push(format!("{name} seed {seed}"));
                    continue;
                }
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["t".to_string()];
            if b.len() == 1 {
                header.push("sigma_minus_budget".into());
            } else {
                header.extend((0..b.len()).map(|c| format!("sigma_minus_budget_{c}")));
            }
            let csv_err = |e: csv::Error| Failure::Runtime(e.to_string());
            w.write_record(&header).map_err(csv_err)?;
            let mut points = Vec::new();
            for r in &trace {
                let gap = r.sigma.as_ref().map(|s| s - &b).unwrap_or_else(|| Vector::from_element(b.len(), f64::NAN));
                positive |= gap.iter().any(|v| *v > 0.0);
                let mut rec = vec![r.t.to_string()];
                rec.extend(gap.iter().map(|v| v.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
                points.push((r.t as f64, gap[0]));
            }
            let bytes = w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))?;
            ctx.write(&format!("{name}_seed{seed}_sigma.csv"), &bytes)?;
            if j == 0 {
                curves.push(Series { label: name.to_string(), points });
            }
        }
    }
    let svg = line_chart("sigma(x) - B", "t", "sigma - B", Scale::Linear, &curves);
    ctx.write("sigma.svg", svg.as_bytes())?;
    if positive {
        ctx.say("note: sigma(x) - B is positive at some rounds; the budget is a soft penalty, so exceeding it is allowed");
    }
    ctx.say(format!("outputs in {}", ctx.out.display()));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("failed runs: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::SigmaTrace(a) => cmd_sigma_trace(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("invalid: {msg}");
            ExitCode::from(2)
        }
    }
}
