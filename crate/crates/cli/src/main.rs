use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use flowsink::analysis::{
    check_monotone_sweep, check_nonexpansive, check_run_certificates, check_translation_equivariance,
    Report, SignedOrderSpec, DEFAULT_SEED,
};
use flowsink::instances::{random_connected_graph, random_cost, random_marginal};
use flowsink::{
    exact_ot, exact_w1, ot_constants, plan_flow, plan_schedule, solve, solve_flow, w1_estimate,
    BlockProblem, ConvergenceTrace, Coupling, Error, FlowInput, FlowPath, FlowProblem, Graph,
    OTInput, OTProblem, Solution, SolveError, StoppingRule,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

/// Above this many planned sweeps the epsilon mode runs to a residual tolerance instead.
const BUDGET_CAP: u64 = 1_000_000;

#[derive(Parser)]
#[command(name = "flowsink", version, about = "Entropic Wasserstein-1 and optimal transport solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Wasserstein-1 on a graph by flow Sinkhorn.
    W1(RunArgs),
    /// Entropic optimal transport by Sinkhorn.
    Ot(RunArgs),
    /// Exact value from the min-cost-flow oracle, for either input format.
    Exact(CommonArgs),
    /// Certificate and property checks on an input file or a built-in
    /// instance (`two-node`, `ot`, `flow`, `all`).
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    input: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    input: PathBuf,
    /// Entropic temperature; overrides the input file's value.
    #[arg(long, conflicts_with = "epsilon")]
    gamma: Option<f64>,
    /// Target accuracy; picks gamma and the sweep budget.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    max_sweeps: usize,
    /// Stop once the first-block residual drops below this.
    #[arg(long)]
    tol: Option<f64>,
    /// Sweep implementation for `w1`.
    #[arg(long, default_value_t = FlowPath::Stable)]
    path: FlowPath,
    /// Write the per-sweep trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_parser = parse_seed)]
    seed: Option<u64>,
    /// Accepted for reproducible scripts; runs are always single-threaded.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(default_value = "all")]
    instance: String,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, value_parser = parse_seed)]
    seed: Option<u64>,
    /// Gamma for input files without one and for built-in instances.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    deterministic: bool,
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u64::from_str_radix(digits, 16).map_err(|e| format!("invalid hex seed {s:?}: {e}"))
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(anyhow::Error),
    Numeric { error: Error, partial_trace: Option<PathBuf> },
    Verification(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::W1(args) => cmd_w1(&args),
        Command::Ot(args) => cmd_ot(&args),
        Command::Exact(args) => cmd_exact(&args),
        Command::Verify(args) => cmd_verify(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric { error, partial_trace }) => {
            match partial_trace {
                Some(p) => eprintln!("numeric failure: {error}; partial trace written to {}", p.display()),
                None => eprintln!("numeric failure: {error}"),
            }
            ExitCode::from(3)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(4)
        }
    }
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse<T: serde::de::DeserializeOwned>(value: Value, path: &Path) -> anyhow::Result<T> {
    serde_json::from_value(value).with_context(|| format!("invalid input in {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string(value).context("serializing output")?;
    println!("{text}");
    Ok(())
}

fn write_trace(path: &Path, trace: &ConvergenceTrace) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    trace.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes the trace when requested; on failure the partial trace always lands
/// somewhere so it can be inspected.
fn finish_run(args: &RunArgs, run: Result<Solution, SolveError>) -> Result<Solution, Failure> {
    match run {
        Ok(sol) => {
            if let Some(path) = &args.trace {
                write_trace(path, &sol.trace)?;
            }
            Ok(sol)
        }
        Err(e) => {
            let path = args.trace.clone().unwrap_or_else(|| {
                std::env::temp_dir().join(format!("flowsink-partial-{}.csv", std::process::id()))
            });
            let written = write_trace(&path, &e.trace).is_ok();
            Err(Failure::Numeric { error: e.error, partial_trace: written.then_some(path) })
        }
    }
}

fn stopping(args: &RunArgs, budget: Option<flowsink::Schedule>) -> StoppingRule {
    match (budget, args.tol) {
        (Some(s), None) if s.sweeps <= BUDGET_CAP => StoppingRule::Budget(s),
        (Some(_), None) => StoppingRule::ResidualTol { tol: 1e-6, max_sweeps: args.max_sweeps },
        (_, Some(tol)) => StoppingRule::ResidualTol { tol, max_sweeps: args.max_sweeps },
        (None, None) => StoppingRule::ResidualTol { tol: 1e-9, max_sweeps: args.max_sweeps },
    }
}

fn positive(name: &str, v: f64) -> anyhow::Result<f64> {
    anyhow::ensure!(v.is_finite() && v > 0.0, "{name} must be positive, got {v}");
    Ok(v)
}

#[derive(Serialize)]
struct W1Output {
    w1_dual: f64,
    w1_primal: f64,
    gamma: f64,
    sweeps: usize,
    res1_l1: f64,
}

fn cmd_w1(args: &RunArgs) -> Result<(), Failure> {
    let input: FlowInput = parse(read_json(&args.input)?, &args.input)?;
    let (problem, budget) = match args.epsilon {
        Some(eps) => {
            // the lifted value is twice W1
            let plan = plan_flow(input.graph, input.b1, input.b2, 2.0 * positive("epsilon", eps)?)?;
            (plan.problem, Some(plan.schedule))
        }
        None => {
            let gamma = args.gamma.or(input.gamma).context("no gamma: pass --gamma or --epsilon, or set \"gamma\" in the input")?;
            (FlowProblem::from_input(input, positive("gamma", gamma)?)?, None)
        }
    };
    let sol = finish_run(args, solve_flow(&problem, stopping(args, budget), args.path))?;
    let est = w1_estimate(&problem, &sol.state).map_err(|error| Failure::Numeric { error, partial_trace: args.trace.clone() })?;
    print_json(&W1Output {
        w1_dual: est.w1_dual(),
        w1_primal: est.w1_primal(),
        gamma: problem.gamma(),
        sweeps: sol.sweeps(),
        res1_l1: sol.trace.last().map_or(f64::NAN, |r| r.res1_l1),
    })
}

#[derive(Serialize)]
struct OtOutput {
    ot_dual: f64,
    ot_primal: f64,
    gamma: f64,
    sweeps: usize,
    res1_l1: f64,
}

fn cmd_ot(args: &RunArgs) -> Result<(), Failure> {
    let input: OTInput = parse(read_json(&args.input)?, &args.input)?;
    let (problem, budget) = match args.epsilon {
        Some(eps) => {
            let eps = positive("epsilon", eps)?;
            let d = input.b1.len() * input.b2.len();
            // the unregularized optimum has unit mass
            let gamma = plan_schedule(eps, 1.0, 1.0, 1.0, 1.0, d)?.gamma;
            let problem = OTProblem::from_input(input, gamma)?;
            let c = ot_constants(&problem, false);
            let u = c.u_gamma.max(f64::MIN_POSITIVE);
            let schedule = plan_schedule(eps, 1.0, c.x_gamma, u, problem.operator_norm_1to1(), d)?;
            (problem, Some(schedule))
        }
        None => {
            let gamma = args.gamma.or(input.gamma).context("no gamma: pass --gamma or --epsilon, or set \"gamma\" in the input")?;
            (OTProblem::from_input(input, positive("gamma", gamma)?)?, None)
        }
    };
    let sol = finish_run(args, solve(&problem, stopping(args, budget)))?;
    let plan = problem.plan_from_duals(&sol.state).map_err(|error| Failure::Numeric { error, partial_trace: args.trace.clone() })?;
    let last = sol.trace.last();
    print_json(&OtOutput {
        ot_dual: last.map_or(f64::NAN, |r| r.f_gamma),
        ot_primal: problem.transport_cost(&plan),
        gamma: problem.gamma(),
        sweeps: sol.sweeps(),
        res1_l1: last.map_or(f64::NAN, |r| r.res1_l1),
    })
}

#[derive(Serialize)]
struct ExactOutput {
    kind: &'static str,
    value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    plan: Option<Vec<Vec<f64>>>,
}

fn cmd_exact(args: &CommonArgs) -> Result<(), Failure> {
    let value = read_json(&args.input)?;
    let out = if value.get("graph").is_some() {
        let input: FlowInput = parse(value, &args.input)?;
        let w1 = exact_w1(&input.graph, &input.b1, &input.b2)?;
        ExactOutput { kind: "w1", value: w1, plan: None }
    } else {
        let input: OTInput = parse(value, &args.input)?;
        let ot = exact_ot(&input.cost, &input.b1, &input.b2)?;
        ExactOutput { kind: "ot", value: ot.value, plan: Some(ot.plan) }
    };
    print_json(&out)
}

fn ot_battery(p: &OTProblem, trials: usize, seed: u64, name: &str) -> flowsink::Result<Vec<Report>> {
    let sigma = SignedOrderSpec::identity(p.dim_primal());
    Ok(vec![
        check_nonexpansive(p, trials, seed, 1e-12, name)?,
        check_translation_equivariance(p, -1.0, trials, seed, name)?,
        check_monotone_sweep(p, &sigma, trials, seed, name)?,
        check_run_certificates(p, 500, 20, seed, name)?,
    ])
}

fn flow_battery(p: &FlowProblem, trials: usize, seed: u64, name: &str) -> flowsink::Result<Vec<Report>> {
    let p = p.clone().with_coupling(Coupling::FMinusG);
    let paired = p.clone().with_coupling(Coupling::GMinusF);
    let sigma = SignedOrderSpec::split(p.dim_primal());
    let mut reports = vec![
        check_nonexpansive(&p, trials, seed, 1e-10, name)?,
        check_translation_equivariance(&paired, Coupling::GMinusF.tau(), trials, seed, &format!("{name} tau=+1"))?,
        check_translation_equivariance(&p, Coupling::FMinusG.tau(), trials, seed, &format!("{name} tau=-1"))?,
        check_monotone_sweep(&p, &sigma, trials, seed, name)?,
    ];
    if !p.is_degenerate() {
        reports.push(check_run_certificates(&p, 500, 20, seed, name)?);
    }
    Ok(reports)
}

fn builtin_two_node(gamma: f64) -> flowsink::Result<FlowProblem> {
    let g = Graph::new(2, [(0, 1, 1.0)])?;
    FlowProblem::new(g, vec![1.0, 0.0], vec![0.0, 1.0], gamma)
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let trials = args.trials;
    let mut reports = Vec::new();
    let builtin_gamma = positive("gamma", args.gamma.unwrap_or(0.1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: &[&str] = match args.instance.as_str() {
        "all" => &["two-node", "ot", "flow"],
        "two-node" => &["two-node"],
        "ot" => &["ot"],
        "flow" => &["flow"],
        _ => &[],
    };
    if names.is_empty() {
        let path = Path::new(&args.instance);
        let value = read_json(path)?;
        let name = path.display().to_string();
        if value.get("graph").is_some() {
            let input: FlowInput = parse(value, path)?;
            let gamma = args.gamma.or(input.gamma).unwrap_or(builtin_gamma);
            let p = FlowProblem::from_input(input, positive("gamma", gamma)?)?;
            reports.extend(flow_battery(&p, trials, seed, &name)?);
        } else {
            let input: OTInput = parse(value, path)?;
            let gamma = args.gamma.or(input.gamma).unwrap_or(builtin_gamma);
            let p = OTProblem::from_input(input, positive("gamma", gamma)?)?;
            reports.extend(ot_battery(&p, trials, seed, &name)?);
        }
    }
    for &name in names {
        match name {
            "two-node" => reports.extend(flow_battery(&builtin_two_node(builtin_gamma)?, trials, seed, name)?),
            "ot" => {
                let c = random_cost(&mut rng, 5, 5);
                let p = OTProblem::new(c, random_marginal(&mut rng, 5), random_marginal(&mut rng, 5), builtin_gamma)?;
                reports.extend(ot_battery(&p, trials, seed, name)?);
            }
            _ => {
                let g = random_connected_graph(&mut rng, 12, 0.3);
                let p = FlowProblem::new(g, random_marginal(&mut rng, 12), random_marginal(&mut rng, 12), builtin_gamma)?;
                reports.extend(flow_battery(&p, trials, seed, name)?);
            }
        }
    }
    print_json(&reports)?;
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} on {}", r.check, r.instance))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(failed.join(", ")))
    }
}
