//! `ctmc-reduce`: certified reduced-order reachability analysis.
//!
//! Exit status is 0 on success, 2 when the requested tolerance is not met
//! and 1 on any error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ctmc_reduce::bench::{bench_model, write_records};
use ctmc_reduce::lyapunov::certificate;
use ctmc_reduce::markov::{build_reachability_system, parse_model, prune_reducible, Ctmc, Ctmdp, Model, ReachabilitySystem};
use ctmc_reduce::models::{build_mm1, build_random_generator, build_tandem, build_tandem_ctmdp, TandemParams};
use ctmc_reduce::reduction::{exact_mismatch_floor, reduce_ctmc, reduce_ctmc_order, Ordering, ReducedSystem};
use ctmc_reduce::switched::{
    build_switched, certified_band, default_delta, reduce_ctmdp, switched_bound, synthesize_policy, SwitchedSystem,
};
use ctmc_reduce::transient::{log_grid, sig12, uniformization_grid, ReducedSolver, SolveResult, UniformizationOptions};

#[derive(Parser, Debug)]
#[command(name = "ctmc-reduce", version, about = "Certified order reduction for CTMC reachability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Choose a reduced order and report its error bound.
    Reduce(Run),
    /// Reachability probabilities with their certified radius on a log grid.
    Solve(Run),
    /// Dwell-time policy for a CTMDP plus its certified band.
    Synthesize(Run),
    /// Runtime sweep of uniformisation against the symbolic solvers.
    Bench(Bench),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
struct Source {
    /// Model file in the line-oriented `ctmc`/`ctmdp` format.
    #[arg(long)]
    model: Option<PathBuf>,
    /// M/M/1 queue `cap,lambda,mu`.
    #[arg(long)]
    mm1: Option<String>,
    /// Tandem network `cap[,lambda,mu1,mu2,mu3,a,p,delta_lambda]`; a CTMDP
    /// with two service modes under `synthesize`.
    #[arg(long)]
    tandem: Option<String>,
    /// Dense random model `n[,seed[,density]]`.
    #[arg(long)]
    random: Option<String>,
}

#[derive(Args, Debug)]
struct Run {
    #[command(flatten)]
    source: Source,
    /// Time horizon.
    #[arg(long = "T", default_value_t = 1.0)]
    t_end: f64,
    /// Error tolerance at the horizon.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Fixed reduced order instead of the tolerance-driven search.
    #[arg(long)]
    r: Option<usize>,
    /// Dwell time for CTMDPs.
    #[arg(long)]
    tau: Option<f64>,
    /// Policy discretisation step.
    #[arg(long)]
    delta: Option<f64>,
    /// Truncation budget of the uniformisation baseline.
    #[arg(long = "trunc-tol", default_value_t = 0.01)]
    trunc_tol: f64,
    /// Grid size for `solve` and `synthesize`.
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Also write the uniformisation baseline on the same grid.
    #[arg(long)]
    baseline: bool,
    /// Use `M = I` for every decision.
    #[arg(long = "identity-m")]
    identity_m: bool,
    /// Output directory; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for `--random` when none is given inline.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum BenchKind {
    Random,
    Mm1,
    Tandem,
}

#[derive(Args, Debug)]
struct Bench {
    #[arg(long, value_enum, default_value_t = BenchKind::Random)]
    kind: BenchKind,
    /// Comma list, or `a..b` for `a, 2a, …` up to `b`. Capacities for the
    /// queue models.
    #[arg(long, default_value = "100,200,500")]
    sizes: String,
    #[arg(long = "T", default_value_t = 5.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Timed repetitions after the warm-up run.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Outcome of a command that may fall short of its tolerance.
enum Status {
    Ok,
    ToleranceNotMet(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Reduce(run) => cmd_reduce(&run),
        Command::Solve(run) => cmd_solve(&run),
        Command::Synthesize(run) => cmd_synthesize(&run),
        Command::Bench(bench) => cmd_bench(&bench),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ToleranceNotMet(msg)) => {
            eprintln!("tolerance not met: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_list(spec: &str, what: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad {what} parameter {t:?}")))
        .collect()
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 {
        bail!("{what} must be a nonnegative integer, got {v}");
    }
    Ok(v as usize)
}

fn tandem_params(spec: &str) -> Result<TandemParams> {
    let v = parse_list(spec, "--tandem")?;
    let mut p = TandemParams::blocking(as_count(v[0], "capacity")?);
    match v.len() {
        1 => {}
        8 => {
            (p.lambda, p.mu1, p.mu2, p.mu3, p.a, p.p, p.delta_lambda) = (v[1], v[2], v[3], v[4], v[5], v[6], v[7]);
            p.b = 1.0 - p.a;
        }
        n => bail!("--tandem takes 1 or 8 values, got {n}"),
    }
    Ok(p)
}

fn load(source: &Source, seed: u64, decision_process: bool) -> Result<Model> {
    if let Some(path) = &source.model {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return parse_model(&text).with_context(|| format!("parsing {}", path.display()));
    }
    if let Some(spec) = &source.mm1 {
        let v = parse_list(spec, "--mm1")?;
        if v.len() != 3 {
            bail!("--mm1 takes cap,lambda,mu");
        }
        return Ok(Model::Ctmc(build_mm1(as_count(v[0], "capacity")?, v[1], v[2])?));
    }
    if let Some(spec) = &source.tandem {
        if decision_process {
            let v = parse_list(spec, "--tandem")?;
            return Ok(Model::Ctmdp(build_tandem_ctmdp(as_count(v[0], "capacity")?)?));
        }
        return Ok(Model::Ctmc(build_tandem(&tandem_params(spec)?)?));
    }
    if let Some(spec) = &source.random {
        let v = parse_list(spec, "--random")?;
        let n = as_count(v[0], "state count")?;
        let seed = v.get(1).map(|&s| as_count(s, "seed")).transpose()?.map_or(seed, |s| s as u64);
        return Ok(Model::Ctmc(build_random_generator(n, seed, v.get(2).copied().unwrap_or(1.0))?));
    }
    unreachable!("clap requires one model source")
}

/// Pruned reachability system and the input index of each target row.
fn prepare(model: &Ctmc) -> Result<(ReachabilitySystem, Vec<usize>)> {
    let (pruned, report) = prune_reducible(model)?;
    if !report.is_identity() {
        eprintln!(
            "pruned {} states with no path to good",
            report.removed_unreachable.len() + report.removed_bsccs.iter().map(Vec::len).sum::<usize>()
        );
    }
    let mut original = vec![0; pruned.n_states()];
    for (s, idx) in report.new_index.iter().enumerate() {
        if let Some(k) = idx {
            original[*k] = s;
        }
    }
    if report.new_index.is_empty() {
        original = (0..pruned.n_states()).collect();
    }
    let system = build_reachability_system(&pruned)?;
    let labels = system.targets.iter().map(|&t| original[system.states[t]]).collect();
    Ok((system, labels))
}

fn reduce_for(run: &Run, system: &ReachabilitySystem) -> Result<ReducedSystem> {
    Ok(match run.r {
        Some(r) => reduce_ctmc_order(system, &certificate(system)?, r, Ordering::Contribution)?,
        None => reduce_ctmc(system, run.t_end, run.eps)?,
    })
}

fn sink(out: &Option<PathBuf>, name: &str) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            Box::new(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn check(bound: f64, eps: f64) -> Status {
    check_exact(bound, eps, false)
}

/// `exact` marks a reduction whose mismatch is at rounding level.
fn check_exact(bound: f64, eps: f64, exact: bool) -> Status {
    if exact || bound <= eps {
        Status::Ok
    } else {
        Status::ToleranceNotMet(format!("bound {} exceeds eps {}", sig12(bound), sig12(eps)))
    }
}

fn switched_for(run: &Run, model: &Ctmdp) -> Result<(SwitchedSystem, f64, f64)> {
    let tau = run.tau.ok_or_else(|| anyhow!("CTMDP analysis needs --tau"))?;
    let (sys, bound) = match run.r {
        Some(r) => {
            let sys = build_switched(model, r, run.identity_m)?;
            let (bound, ..) = switched_bound(&sys, run.t_end, tau)?;
            (sys, bound)
        }
        None => {
            let red = reduce_ctmdp(model, run.t_end, run.eps, tau, run.identity_m)?;
            (red.system, red.bound)
        }
    };
    Ok((sys, bound, tau))
}

fn cmd_reduce(run: &Run) -> Result<Status> {
    let mut out = sink(&run.out, "reduce.txt")?;
    match load(&run.source, run.seed, run.tau.is_some())? {
        Model::Ctmc(model) => {
            let (system, _) = prepare(&model)?;
            let cert = certificate(&system)?;
            let red = reduce_for(run, &system)?;
            let bound = red.envelope.eval(run.t_end);
            writeln!(out, "states={}", model.n_states())?;
            writeln!(out, "m={}", system.m())?;
            writeln!(out, "r={}", red.r)?;
            writeln!(out, "certificate={:?}", cert.kind)?;
            writeln!(out, "kappa={}", sig12(red.envelope.kappa))?;
            writeln!(out, "xi={}", sig12(red.envelope.xi))?;
            writeln!(out, "coeff={}", sig12(red.envelope.coeff))?;
            writeln!(out, "bound_at_T={}", sig12(bound))?;
            out.flush()?;
            Ok(check_exact(bound, run.eps, red.envelope.gamma_norm <= exact_mismatch_floor(&system)))
        }
        Model::Ctmdp(model) => {
            let (sys, bound, tau) = switched_for(run, &model)?;
            let orders: Vec<String> = sys.decisions.iter().map(|d| d.r().to_string()).collect();
            writeln!(out, "states={}", model.n_states())?;
            writeln!(out, "decisions={}", model.n_decisions())?;
            writeln!(out, "m={}", sys.m())?;
            writeln!(out, "r={}", sys.r)?;
            writeln!(out, "r_per_decision={}", orders.join(" "))?;
            writeln!(out, "kappa={}", sig12(sys.kappa))?;
            writeln!(out, "mu={}", sig12(sys.mu))?;
            writeln!(out, "delta_max={}", sig12(sys.delta_max))?;
            writeln!(out, "tau={}", sig12(tau))?;
            writeln!(out, "bound_at_T={}", sig12(bound))?;
            out.flush()?;
            Ok(check(bound, run.eps))
        }
    }
}

fn cmd_solve(run: &Run) -> Result<Status> {
    let Model::Ctmc(model) = load(&run.source, run.seed, false)? else {
        bail!("solve takes a CTMC; use synthesize for a CTMDP");
    };
    let (system, labels) = prepare(&model)?;
    let red = reduce_for(run, &system)?;
    let times = log_grid(run.t_end, run.points);
    let result = ReducedSolver::new(&red)?.solve(&times);
    result.write_csv(sink(&run.out, "solve.csv")?, &labels)?;
    if run.baseline {
        let opts = UniformizationOptions {
            trunc_tol: run.trunc_tol,
            ..UniformizationOptions::default()
        };
        let (values, report) = uniformization_grid(&system, &times, &opts)?;
        let mut probs = nalgebra::DMatrix::zeros(labels.len(), times.len());
        for (c, v) in values.iter().enumerate() {
            probs.set_column(c, &system.select(v));
        }
        let base = SolveResult {
            times: times.clone(),
            probs,
            eps: vec![run.trunc_tol; times.len()],
        };
        base.write_csv(sink(&run.out, "uniformization.csv")?, &labels)?;
        eprintln!("uniformisation: {} steps of {} ({} products)", report.steps, sig12(report.step), report.matvecs);
    }
    let exact = red.envelope.gamma_norm <= exact_mismatch_floor(&system);
    Ok(check_exact(red.envelope.eval(run.t_end), run.eps, exact))
}

fn cmd_synthesize(run: &Run) -> Result<Status> {
    let Model::Ctmdp(model) = load(&run.source, run.seed, true)? else {
        bail!("synthesize takes a CTMDP");
    };
    let (sys, bound, tau) = switched_for(run, &model)?;
    let delta = run.delta.unwrap_or_else(|| default_delta(run.t_end, tau));
    let policy = synthesize_policy(&sys, run.t_end, tau, delta)?;
    let comment = format!("tau={}, delta={}, r={}, bound={}", sig12(tau), sig12(delta), sys.r, sig12(bound));
    policy.write_csv(sink(&run.out, "policy.csv")?, &comment)?;
    let times = log_grid(run.t_end, run.points);
    let band = certified_band(&sys, &policy, &times)?;
    let labels: Vec<usize> = sys.targets.iter().map(|&t| sys.decisions[0].system.states[t]).collect();
    let result = SolveResult {
        times: band.times,
        probs: band.probs,
        eps: band.eps,
    };
    result.write_csv(sink(&run.out, "band.csv")?, &labels)?;
    Ok(check(bound, run.eps))
}

fn parse_sizes(spec: &str) -> Result<Vec<usize>> {
    if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
        if a == 0 || b < a {
            bail!("size range {spec:?} is empty");
        }
        return Ok((1..).map(|k| k * a).take_while(|&n| n <= b).collect());
    }
    spec.split(',').map(|t| t.trim().parse().with_context(|| format!("bad size {t:?}"))).collect()
}

fn cmd_bench(bench: &Bench) -> Result<Status> {
    let mut records = Vec::new();
    for n in parse_sizes(&bench.sizes)? {
        let model = match bench.kind {
            BenchKind::Random => build_random_generator(n, bench.seed, 1.0)?,
            BenchKind::Mm1 => build_mm1(n, 10.0, 4.0)?,
            BenchKind::Tandem => build_tandem(&TandemParams::blocking(n))?,
        };
        let (pruned, _) = prune_reducible(&model)?;
        let record = bench_model(&pruned, bench.t_end, bench.eps, bench.reps)?;
        eprintln!(
            "n={} r={} uniformisation={}s reduced={}s",
            record.n_states,
            record.r_chosen,
            sig12(record.wall_time_uniformization),
            sig12(record.wall_time_symbolic_reduced)
        );
        records.push(record);
    }
    write_records(sink(&bench.out, "bench.csv")?, &records)?;
    Ok(Status::Ok)
}
