//! CTMDPs as switched affine systems: per-decision reductions, the
//! dwell-time error recursion, jump resets at switches and sub-optimal
//! policy synthesis on the reduced switched system.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lyapunov::{certificate, verify_lmi, LmiCheck};
use crate::markov::{build_switched_partition, Ctmdp, ReachabilitySystem};
use crate::reduction::initial_state;
use crate::spectral::{modal_scores, real_schur, reorder_prefix, score_order};
use crate::transient::{oracle_expm, sig12};

/// Reduction of the system of one decision vector.
#[derive(Debug, Clone)]
pub struct DecisionReduction {
    pub system: ReachabilitySystem,
    pub a_bar: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// `X̄_d(0)`, the `M_d`-weighted fit of `A_d⁻¹β_d`.
    pub x_bar0: DVector<f64>,
    pub m_diag: DVector<f64>,
    pub kappa: f64,
}

impl DecisionReduction {
    pub fn r(&self) -> usize {
        self.a_bar.nrows()
    }

    pub fn steady(&self) -> &DVector<f64> {
        &self.system.steady
    }
}

#[derive(Debug, Clone)]
pub struct SwitchedSystem {
    pub decisions: Vec<DecisionReduction>,
    /// `min_d κ_d`.
    pub kappa: f64,
    /// Smallest `μ` with `M_i ⪯ μ M_j` for all pairs.
    pub mu: f64,
    /// `max_{i,j} ‖A_j⁻¹β_j − A_i⁻¹β_i‖_{M_j}`.
    pub delta_max: f64,
    /// Requested shared order; a decision keeps one more state when the cut
    /// would split a complex pair.
    pub r: usize,
    pub targets: Vec<usize>,
}

/// `sqrt(vᵀ diag(m) v)`.
pub fn m_norm(m_diag: &DVector<f64>, v: &DVector<f64>) -> f64 {
    v.iter().zip(m_diag.iter()).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
}

impl SwitchedSystem {
    pub fn n_decisions(&self) -> usize {
        self.decisions.len()
    }

    pub fn m(&self) -> usize {
        self.decisions[0].system.m()
    }

    /// Every decision kept at full order: resets are exact and the reduced
    /// trajectory equals the full one.
    pub fn is_full_order(&self) -> bool {
        let m = self.m();
        self.decisions.iter().all(|d| d.r() == m)
    }

    /// `Δ_ij = A_j⁻¹β_j − A_i⁻¹β_i`.
    pub fn delta(&self, i: usize, j: usize) -> DVector<f64> {
        self.decisions[j].steady() - self.decisions[i].steady()
    }

    /// `ε₀ = ‖A_d⁻¹β_d − P_d X̄_d(0)‖_{M_d}` and `ε̄₀ = ‖P_d X̄_d(0)‖_{M_d}`
    /// for a start in decision `d`.
    pub fn initial_errors(&self, d: usize) -> (f64, f64) {
        let dr = &self.decisions[d];
        let fit = &dr.p * &dr.x_bar0;
        (m_norm(&dr.m_diag, &(dr.steady() - &fit)), m_norm(&dr.m_diag, &fit))
    }
}

/// Per-decision systems, certificates and reductions at order `r`. With
/// `common_identity` every `M_d = I` (so `μ = 1`) and each `κ_d` must be
/// certified by the identity; otherwise `M_d = diag(ν_d)`.
pub fn build_switched(model: &Ctmdp, r: usize, common_identity: bool) -> Result<SwitchedSystem> {
    let systems = build_switched_partition(model)?;
    let m = systems[0].m();
    let r = r.clamp(1, m);
    let mut decisions = Vec::with_capacity(systems.len());
    for (d, system) in systems.into_iter().enumerate() {
        let cert = certificate(&system).map_err(|e| match e {
            Error::AssumptionViolated(msg) => Error::AssumptionViolated(format!("decision {d}: {msg}")),
            other => other,
        })?;
        let m_diag = if common_identity {
            let id = DMatrix::identity(m, m);
            if let LmiCheck::Infeasible { constraint, margin } = verify_lmi(&system.a, &id, cert.kappa, &system.targets) {
                return Err(Error::IdentityMInfeasible {
                    decision: d,
                    detail: format!("{constraint:?} constraint fails at kappa = {} (extreme eigenvalue {margin:e})", cert.kappa),
                });
            }
            DVector::from_element(m, 1.0)
        } else {
            cert.m_diag.clone()
        };
        let f = real_schur(&system.a)?;
        let y = f.u.transpose() * &system.steady;
        let order = score_order(&f, &modal_scores(&f, &y));
        let (g, r_d) = reorder_prefix(&f, &order, r)?;
        let a_bar = g.n.view((0, 0), (r_d, r_d)).into_owned();
        let p = g.u.columns(0, r_d).into_owned();
        let x_bar0 = initial_state(&p, &m_diag, &system.steady)?;
        decisions.push(DecisionReduction {
            system,
            a_bar,
            p,
            x_bar0,
            m_diag,
            kappa: cert.kappa,
        });
    }
    let kappa = decisions.iter().map(|d| d.kappa).fold(f64::INFINITY, f64::min);
    let mut mu = 1.0f64;
    let mut delta_max = 0.0f64;
    for i in 0..decisions.len() {
        for j in 0..decisions.len() {
            if i == j {
                continue;
            }
            let (mi, mj) = (&decisions[i].m_diag, &decisions[j].m_diag);
            for k in 0..m {
                mu = mu.max(mi[k] / mj[k]);
            }
            let delta = decisions[j].steady() - decisions[i].steady();
            delta_max = delta_max.max(m_norm(mj, &delta));
        }
    }
    let targets = decisions[0].system.targets.clone();
    Ok(SwitchedSystem {
        decisions,
        kappa,
        mu,
        delta_max,
        r,
        targets,
    })
}

/// The sequences `ε_i`, `ε̄_i` for `i = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecursion {
    pub eps: Vec<f64>,
    pub eps_bar: Vec<f64>,
    pub g: f64,
}

impl ErrorRecursion {
    /// `ε̄_i = μgε̄_{i−1} + Δ`, `ε_i = μgε_{i−1} + 2μgε̄_{i−1} + 2Δ`.
    pub fn run(mu: f64, g: f64, delta_max: f64, n: usize, eps0: f64, eps_bar0: f64) -> Self {
        let mut eps = vec![eps0];
        let mut eps_bar = vec![eps_bar0];
        let c = mu * g;
        for i in 1..=n {
            let (e, eb) = (eps[i - 1], eps_bar[i - 1]);
            eps_bar.push(c * eb + delta_max);
            eps.push(c * e + 2.0 * c * eb + 2.0 * delta_max);
        }
        Self { eps, eps_bar, g }
    }

    pub fn last(&self) -> f64 {
        *self.eps.last().unwrap()
    }
}

/// Smallest admissible dwell time, `log(μ)/κ`.
pub fn min_dwell(mu: f64, kappa: f64) -> f64 {
    mu.ln() / kappa
}

pub fn error_recursion(sys: &SwitchedSystem, tau: f64, n: usize, eps0: f64, eps_bar0: f64) -> Result<ErrorRecursion> {
    let required = min_dwell(sys.mu, sys.kappa);
    if !(tau > required) {
        return Err(Error::DwellTooShort { tau, required });
    }
    let g = (-sys.kappa * tau).exp();
    Ok(ErrorRecursion::run(sys.mu, g, sys.delta_max, n, eps0, eps_bar0))
}

/// `ε_n e^{−κ(T−t_n)}`.
pub fn bound_at_horizon(eps_n: f64, kappa: f64, t_end: f64, t_n: f64) -> f64 {
    assert!(t_n <= t_end, "last switch after the horizon");
    eps_n * (-kappa * (t_end - t_n)).exp()
}

/// Limit of the recursion for `μg < 1`: `2Δ_max/(1 − μg)²`.
pub fn steady_error(mu: f64, g: f64, delta_max: f64) -> Result<f64> {
    let c = mu * g;
    if c >= 1.0 {
        return Err(Error::RecursionDivergent(c));
    }
    Ok(2.0 * delta_max / ((1.0 - c) * (1.0 - c)))
}

/// Reduced state after switching from `d_from` to `d_to`: the
/// `M_to`-weighted least-squares fit of `P_from X̄⁻ + Δ` in the range of
/// `P_to`. With `M_to = I` this is `P_toᵀ(P_from X̄⁻ + Δ)`.
pub fn jump_reset(sys: &SwitchedSystem, d_from: usize, d_to: usize, x_minus: &DVector<f64>) -> Result<DVector<f64>> {
    let from = &sys.decisions[d_from];
    let to = &sys.decisions[d_to];
    let full = &from.p * x_minus + sys.delta(d_from, d_to);
    initial_state(&to.p, &to.m_diag, &full)
}

/// Result of the order search over a CTMDP.
#[derive(Debug, Clone)]
pub struct CtmdpReduction {
    pub system: SwitchedSystem,
    /// Worst case over the initial decision.
    pub bound: f64,
    pub n_switches: usize,
    pub eps0: f64,
    pub eps_bar0: f64,
    pub tolerance_met: bool,
}

/// Horizon bound for order `sys.r`, maximised over the initial decision,
/// with `n = ⌊T/τ⌋` switches and `t_n = nτ`.
pub fn switched_bound(sys: &SwitchedSystem, t_end: f64, tau: f64) -> Result<(f64, f64, f64)> {
    let n = (t_end / tau).floor() as usize;
    let (mut eps0, mut eps_bar0) = (0.0f64, 0.0f64);
    for d in 0..sys.n_decisions() {
        let (e, eb) = sys.initial_errors(d);
        eps0 = eps0.max(e);
        eps_bar0 = eps_bar0.max(eb);
    }
    let rec = error_recursion(sys, tau, n, eps0, eps_bar0)?;
    if sys.is_full_order() {
        return Ok((0.0, eps0, eps_bar0));
    }
    Ok((bound_at_horizon(rec.last(), sys.kappa, t_end, n as f64 * tau), eps0, eps_bar0))
}

/// Smallest shared order whose horizon bound is at most `eps_max`. When no
/// order qualifies the full order is returned with `tolerance_met` unset.
pub fn reduce_ctmdp(model: &Ctmdp, t_end: f64, eps_max: f64, tau: f64, common_identity: bool) -> Result<CtmdpReduction> {
    let m = model.n_states() - 1 - usize::from(model.bad().is_some());
    let mut r = 1;
    loop {
        let system = build_switched(model, r, common_identity)?;
        let (bound, eps0, eps_bar0) = switched_bound(&system, t_end, tau)?;
        let reached = system.decisions.iter().map(|d| d.r()).min().unwrap_or(m);
        if bound <= eps_max || reached >= m {
            return Ok(CtmdpReduction {
                n_switches: (t_end / tau).floor() as usize,
                system,
                bound,
                eps0,
                eps_bar0,
                tolerance_met: bound <= eps_max,
            });
        }
        r = reached + 1;
    }
}

/// Piecewise-constant policy: `segments[i] = (start, decision)` with the
/// first start at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolicy {
    pub segments: Vec<(f64, usize)>,
    pub tau: f64,
    pub horizon: f64,
}

impl PiecewisePolicy {
    pub fn constant(decision: usize, horizon: f64, tau: f64) -> Self {
        Self {
            segments: vec![(0.0, decision)],
            tau,
            horizon,
        }
    }

    pub fn decision_at(&self, t: f64) -> usize {
        self.segments.iter().rev().find(|s| s.0 <= t).map(|s| s.1).unwrap_or(self.segments[0].1)
    }

    pub fn switch_times(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.0).collect()
    }

    pub fn n_switches(&self) -> usize {
        self.segments.len() - 1
    }

    /// Dwell and ordering invariants, with a relative slack for grid
    /// rounding.
    pub fn validate(&self) -> Result<()> {
        let slack = 1e-9 * self.horizon.max(1.0);
        if self.segments.is_empty() || self.segments[0].0 != 0.0 {
            return Err(Error::InvalidModel("policy must start at time zero".into()));
        }
        for w in self.segments.windows(2) {
            if w[1].0 - w[0].0 < self.tau - slack {
                return Err(Error::InvalidModel(format!("segments at {} and {} violate the dwell time {}", w[0].0, w[1].0, self.tau)));
            }
            if w[0].1 == w[1].1 {
                return Err(Error::InvalidModel(format!("no decision change at {}", w[1].0)));
            }
        }
        if self.segments.last().unwrap().0 > self.horizon + slack {
            return Err(Error::InvalidModel("segment starts after the horizon".into()));
        }
        Ok(())
    }

    /// `start_time,decision` rows after a `#` comment line.
    pub fn write_csv<W: Write>(&self, mut out: W, comment: &str) -> std::io::Result<()> {
        writeln!(out, "# {comment}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["start_time", "decision"])?;
        for &(t, d) in &self.segments {
            w.write_record([sig12(t), d.to_string()])?;
        }
        w.flush()
    }
}

/// `min(τ/50, 10⁻³T)`.
pub fn default_delta(t_end: f64, tau: f64) -> f64 {
    (tau / 50.0).min(1e-3 * t_end)
}

/// Sum over the target rows of `v`.
fn target_sum(targets: &[usize], v: &DVector<f64>) -> f64 {
    targets.iter().map(|&t| v[t]).sum()
}

/// First index of the largest score.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (d, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = d;
        }
    }
    best
}

/// Dwell-time-constrained greedy policy on the reduced switched system.
/// At each grid point `kδ` every decision is scored by the growth rate of
/// the summed target reachability, `Σ_S (P_d Ā_d X̄_d)`, where `X̄_d` is
/// the active reduced state carried over by `jump_reset`; at `t = 0` the
/// exact rate `Σ_S β_d` is used. Ties go to the lower index. After a
/// switch the decision is held for `⌊τ/δ⌋ + 1` steps.
pub fn synthesize_policy(sys: &SwitchedSystem, t_end: f64, tau: f64, delta: f64) -> Result<PiecewisePolicy> {
    if !(delta > 0.0 && delta <= tau) {
        return Err(Error::InvalidModel(format!("discretisation step {delta} must lie in (0, tau = {tau}]")));
    }
    let nd = sys.n_decisions();
    let steps: Vec<DMatrix<f64>> = sys.decisions.iter().map(|d| (&d.a_bar * delta).exp()).collect();
    let rates: Vec<DMatrix<f64>> = sys.decisions.iter().map(|d| &d.p * &d.a_bar).collect();
    let initial: Vec<f64> = sys.decisions.iter().map(|d| target_sum(&sys.targets, &d.system.beta)).collect();
    let mut active = argmax(&initial);
    let mut x = sys.decisions[active].x_bar0.clone();
    let mut policy = PiecewisePolicy::constant(active, t_end, tau);
    let hold = (tau / delta).floor() as usize + 1;
    let last = (t_end / delta).floor() as usize;
    let mut k = 0usize;
    let advance = |x: &mut DVector<f64>, d: usize, n: usize| {
        for _ in 0..n {
            *x = &steps[d] * &*x;
        }
    };
    advance(&mut x, active, hold);
    k += hold;
    while k <= last {
        let mut candidates = Vec::with_capacity(nd);
        for d in 0..nd {
            candidates.push(if d == active { x.clone() } else { jump_reset(sys, active, d, &x)? });
        }
        let scores: Vec<f64> = (0..nd).map(|d| target_sum(&sys.targets, &(&rates[d] * &candidates[d]))).collect();
        let best = argmax(&scores);
        if best != active && scores[best] > scores[active] {
            active = best;
            x = candidates.swap_remove(best);
            policy.segments.push((k as f64 * delta, active));
            advance(&mut x, active, hold);
            k += hold;
        } else {
            advance(&mut x, active, 1);
            k += 1;
        }
    }
    policy.validate()?;
    Ok(policy)
}

/// Reachability vector `W_S(t)` of every transient state under `policy`
/// at the sorted times `times`, integrated segment by segment with the
/// oracle on `X = W_S + A_d⁻¹β_d`.
pub fn simulate_switched_full(sys: &SwitchedSystem, policy: &PiecewisePolicy, times: &[f64]) -> Result<Vec<DVector<f64>>> {
    let m = sys.m();
    let mut w = DVector::zeros(m);
    let mut out = Vec::with_capacity(times.len());
    let mut seg = 0;
    let mut seg_start = 0.0;
    let bounds: Vec<f64> = policy.segments.iter().map(|s| s.0).collect();
    for &t in times {
        while seg + 1 < bounds.len() && bounds[seg + 1] <= t {
            let d = policy.segments[seg].1;
            let steady = sys.decisions[d].steady();
            let x = oracle_expm(&sys.decisions[d].system.a, &(&w + steady), bounds[seg + 1] - seg_start)?;
            w = x - steady;
            seg += 1;
            seg_start = bounds[seg];
        }
        let d = policy.segments[seg].1;
        let steady = sys.decisions[d].steady();
        let x = oracle_expm(&sys.decisions[d].system.a, &(&w + steady), t - seg_start)?;
        out.push(x - steady);
    }
    Ok(out)
}

/// Reduced state and active decision at each sorted time under `policy`,
/// starting from `X̄_{d₀}(0)` and resetting at every switch.
pub fn simulate_switched_reduced(
    sys: &SwitchedSystem,
    policy: &PiecewisePolicy,
    times: &[f64],
) -> Result<Vec<(usize, DVector<f64>)>> {
    let mut d = policy.segments[0].1;
    let mut x = sys.decisions[d].x_bar0.clone();
    let mut seg = 0;
    let mut seg_start = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while seg + 1 < policy.segments.len() && policy.segments[seg + 1].0 <= t {
            let (next_start, next) = policy.segments[seg + 1];
            let x_minus = (&sys.decisions[d].a_bar * (next_start - seg_start)).exp() * &x;
            x = jump_reset(sys, d, next, &x_minus)?;
            d = next;
            seg += 1;
            seg_start = next_start;
        }
        out.push((d, (&sys.decisions[d].a_bar * (t - seg_start)).exp() * &x));
    }
    Ok(out)
}

/// Reduced reachability prediction with its certified radius at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedBand {
    pub times: Vec<f64>,
    /// Raw predicted reachability of the target states, one column per time.
    pub probs: DMatrix<f64>,
    pub eps: Vec<f64>,
}

/// Prediction `C_S(P_d X̄ − A_d⁻¹β_d)` and radius `ε_i e^{−κ(t − t_i)}`
/// after the `i`-th switch, for the policy's actual initial decision.
pub fn certified_band(sys: &SwitchedSystem, policy: &PiecewisePolicy, times: &[f64]) -> Result<SwitchedBand> {
    let states = simulate_switched_reduced(sys, policy, times)?;
    let (eps0, eps_bar0) = sys.initial_errors(policy.segments[0].1);
    let rec = error_recursion(sys, policy.tau, policy.n_switches(), eps0, eps_bar0)?;
    let mut probs = DMatrix::zeros(sys.targets.len(), times.len());
    let mut eps = Vec::with_capacity(times.len());
    for (c, (&t, (d, x))) in times.iter().zip(&states).enumerate() {
        let dr = &sys.decisions[*d];
        let w = &dr.p * x - dr.steady();
        for (row, &s) in sys.targets.iter().enumerate() {
            probs[(row, c)] = w[s];
        }
        let i = policy.segments.iter().filter(|s| s.0 <= t).count() - 1;
        let t_i = policy.segments[i].0;
        eps.push(if sys.is_full_order() { 0.0 } else { bound_at_horizon(rec.eps[i], sys.kappa, t, t_i) });
    }
    Ok(SwitchedBand {
        times: times.to_vec(),
        probs,
        eps,
    })
}
