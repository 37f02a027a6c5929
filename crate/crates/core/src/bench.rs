//! Runtime comparison of the uniformisation baseline against the symbolic
//! solution with and without reduction.

use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::lyapunov::certificate;
use crate::markov::{build_reachability_system, Ctmc, ReachabilitySystem};
use crate::reduction::{reduce_ctmc, reduce_ctmc_order, Ordering};
use crate::transient::{sig12, uniformization_solve, ReducedSolver, UniformizationOptions};

/// Median wall times in seconds for one model size.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRecord {
    pub n_states: usize,
    pub wall_time_uniformization: f64,
    pub wall_time_symbolic_full: f64,
    pub wall_time_symbolic_reduced: f64,
    pub r_chosen: usize,
    pub bound_at_t: f64,
}

/// Median of `reps` timed runs after one discarded warm-up run.
pub fn time_median<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(Duration, T)> {
    let mut last = f()?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        let start = Instant::now();
        last = f()?;
        times.push(start.elapsed());
    }
    times.sort();
    Ok((times[times.len() / 2], last))
}

/// Symbolic pipeline at `t_end`: certificate, order search, exponential sum
/// and evaluation. Returns the chosen order and the bound.
pub fn symbolic_reduced(system: &ReachabilitySystem, t_end: f64, eps: f64) -> Result<(usize, f64)> {
    let reduced = reduce_ctmc(system, t_end, eps)?;
    let at = ReducedSolver::new(&reduced)?.at(t_end);
    Ok((reduced.r, at.radius))
}

/// Symbolic pipeline without reduction.
pub fn symbolic_full(system: &ReachabilitySystem, t_end: f64) -> Result<f64> {
    let cert = certificate(system)?;
    let reduced = reduce_ctmc_order(system, &cert, system.m(), Ordering::Contribution)?;
    Ok(ReducedSolver::new(&reduced)?.raw(t_end)[0])
}

/// Times the three solvers on one model. The uniformisation truncation
/// budget equals `eps`, the accuracy certified for the reduced solution.
pub fn bench_model(model: &Ctmc, t_end: f64, eps: f64, reps: usize) -> Result<RuntimeRecord> {
    let system = build_reachability_system(model)?;
    let opts = UniformizationOptions {
        trunc_tol: eps,
        ..UniformizationOptions::default()
    };
    let (unif, _) = time_median(reps, || uniformization_solve(&system, t_end, &opts))?;
    let (full, _) = time_median(reps, || symbolic_full(&system, t_end))?;
    let (red, (r, bound)) = time_median(reps, || symbolic_reduced(&system, t_end, eps))?;
    Ok(RuntimeRecord {
        n_states: model.n_states(),
        wall_time_uniformization: unif.as_secs_f64(),
        wall_time_symbolic_full: full.as_secs_f64(),
        wall_time_symbolic_reduced: red.as_secs_f64(),
        r_chosen: r,
        bound_at_t: bound,
    })
}

pub fn write_records<W: Write>(out: W, records: &[RuntimeRecord]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n_states",
        "wall_time_uniformization",
        "wall_time_symbolic_full",
        "wall_time_symbolic_reduced",
        "r_chosen",
        "bound_at_T",
    ])?;
    for r in records {
        w.write_record([
            r.n_states.to_string(),
            sig12(r.wall_time_uniformization),
            sig12(r.wall_time_symbolic_full),
            sig12(r.wall_time_symbolic_reduced),
            r.r_chosen.to_string(),
            sig12(r.bound_at_t),
        ])?;
    }
    w.flush()
}
