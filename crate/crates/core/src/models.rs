//! Benchmark model builders: a finite M/M/1 queue, the M/Cox2/1 + M/M/1
//! tandem network (as a CTMC and as a two-mode CTMDP) and dense random
//! generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::markov::{Ctmc, Ctmdp, RateMatrix};

/// Birth-death queue with states `0..=cap` (queue length). Good is the
/// full queue, made absorbing; the target is the empty queue.
pub fn build_mm1(cap: usize, lambda: f64, mu: f64) -> Result<Ctmc> {
    if cap < 1 {
        return Err(Error::InvalidModel("capacity must be at least 1".into()));
    }
    let mut trip = Vec::new();
    for i in 0..cap {
        trip.push((i, i + 1, lambda));
        if i > 0 {
            trip.push((i, i - 1, mu));
        }
    }
    Ctmc::new(RateMatrix::from_triplets(cap + 1, trip)?, cap, None, vec![0])
}

/// Rates of the tandem network. Phase 1 of station 1 serves at `mu1` and
/// passes a job to phase 2 with probability `a` or straight to station 2
/// with probability `b`; phase 2 serves at `mu2`; station 2 serves at
/// `mu3`. A returned-job stream of rate `p·Δλ` feeds station 1 while
/// phase 1 is busy and may route to station 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TandemParams {
    pub cap: usize,
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub a: f64,
    pub b: f64,
    pub p: f64,
    pub delta_lambda: f64,
}

impl TandemParams {
    /// The configuration of the blocking-probability study.
    pub fn blocking(cap: usize) -> Self {
        Self {
            cap,
            lambda: 4.0,
            mu1: 2.0,
            mu2: 2.0,
            mu3: 4.0,
            a: 0.1,
            b: 0.9,
            p: 0.0,
            delta_lambda: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cap < 1 {
            return Err(Error::InvalidModel("capacity must be at least 1".into()));
        }
        if (self.a + self.b - 1.0).abs() > 1e-12 || self.a < 0.0 || self.b < 0.0 {
            return Err(Error::InvalidModel(format!("routing a = {}, b = {} must be a distribution", self.a, self.b)));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidModel(format!("return fraction p = {} outside [0, 1]", self.p)));
        }
        Ok(())
    }
}

/// Tandem configuration `(q1, phase, q2)`; the phase is 1 whenever the
/// first station is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TandemState {
    pub q1: usize,
    pub phase: u8,
    pub q2: usize,
}

/// Lexicographic enumeration of all tandem configurations.
pub fn tandem_states(cap: usize) -> Vec<TandemState> {
    let mut out = Vec::new();
    for q1 in 0..=cap {
        let phases: &[u8] = if q1 == 0 { &[1] } else { &[1, 2] };
        for &phase in phases {
            for q2 in 0..=cap {
                out.push(TandemState { q1, phase, q2 });
            }
        }
    }
    out
}

/// Where a returned job goes when station 1 is full.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Overflow {
    Drop,
    To(usize),
}

/// Outgoing transitions of `s` as `(successor or None for overflow, rate)`.
fn tandem_moves(s: TandemState, t: &TandemParams) -> Vec<(Option<TandemState>, f64)> {
    let c = t.cap;
    let mut out = Vec::new();
    if s.q1 < c {
        let phase = if s.q1 == 0 { 1 } else { s.phase };
        out.push((Some(TandemState { q1: s.q1 + 1, phase, ..s }), t.lambda));
    }
    if s.q1 > 0 && s.phase == 1 {
        out.push((Some(TandemState { phase: 2, ..s }), t.a * t.mu1));
        if s.q2 < c {
            out.push((Some(TandemState { q1: s.q1 - 1, phase: 1, q2: s.q2 + 1 }), t.b * t.mu1));
            let ret = t.p * t.delta_lambda;
            if s.q1 < c {
                out.push((Some(TandemState { q1: s.q1 + 1, ..s }), ret));
            } else {
                out.push((None, ret));
            }
        }
    }
    if s.q1 > 0 && s.phase == 2 && s.q2 < c {
        out.push((Some(TandemState { q1: s.q1 - 1, phase: 1, q2: s.q2 + 1 }), t.mu2));
    }
    if s.q2 > 0 {
        out.push((Some(TandemState { q2: s.q2 - 1, ..s }), t.mu3));
    }
    out.retain(|m| m.1 > 0.0);
    out
}

fn tandem_rates(
    states: &[TandemState],
    index: impl Fn(TandemState) -> usize,
    absorbing: impl Fn(TandemState) -> bool,
    n: usize,
    params: impl Fn(TandemState) -> TandemParams,
    overflow: Overflow,
) -> Result<RateMatrix> {
    let mut trip = Vec::new();
    for &s in states {
        if absorbing(s) {
            continue;
        }
        let i = index(s);
        for (next, rate) in tandem_moves(s, &params(s)) {
            let j = match (next, overflow) {
                (Some(ns), _) => index(ns),
                (None, Overflow::To(b)) => b,
                (None, Overflow::Drop) => continue,
            };
            if j != i {
                trip.push((i, j, rate));
            }
        }
    }
    RateMatrix::from_triplets(n, trip)
}

/// Tandem network as a CTMC. All configurations with both stations full
/// are merged into one absorbing good state (the last index); the target
/// is the empty configuration. Returned jobs that find station 1 full are
/// lost.
pub fn build_tandem(params: &TandemParams) -> Result<Ctmc> {
    params.validate()?;
    let c = params.cap;
    let all = tandem_states(c);
    let transient: Vec<TandemState> = all.iter().copied().filter(|s| !(s.q1 == c && s.q2 == c)).collect();
    let good = transient.len();
    let index = |s: TandemState| {
        if s.q1 == c && s.q2 == c {
            good
        } else {
            transient.binary_search(&s).unwrap()
        }
    };
    let rates = tandem_rates(&all, index, |s| s.q1 == c && s.q2 == c, good + 1, |_| *params, Overflow::Drop)?;
    let empty = index(TandemState { q1: 0, phase: 1, q2: 0 });
    Ctmc::new(rates, good, None, vec![empty])
}

/// Operating modes of the controllable tandem network: `(a, p)` pairs.
pub const TANDEM_MODES: [(f64, f64); 2] = [(0.6, 0.1), (0.7, 0.05)];

/// Tandem network with capacity `cap` whose phase-1 routing is chosen per
/// state: in every configuration with phase 1 busy and room in station 2
/// the controller picks a mode from [`TANDEM_MODES`] (fast, then safe).
/// Both stations empty is the absorbing good state; returned jobs that
/// overflow station 1 go to an absorbing bad state (the last index). The
/// target is `(cap, 2, 0)`. Decision vector `d` selects the safe mode in
/// the `k`-th controllable state when bit `k` of `d` is set.
pub fn build_tandem_ctmdp(cap: usize) -> Result<Ctmdp> {
    let base = TandemParams {
        cap,
        lambda: 3.0,
        mu1: 2.5,
        mu2: 2.5,
        mu3: 3.0,
        a: TANDEM_MODES[0].0,
        b: 1.0 - TANDEM_MODES[0].0,
        p: TANDEM_MODES[0].1,
        delta_lambda: 0.05,
    };
    base.validate()?;
    let states = tandem_states(cap);
    let bad = states.len();
    let index = |s: TandemState| states.binary_search(&s).unwrap();
    let good = index(TandemState { q1: 0, phase: 1, q2: 0 });
    let controllable: Vec<TandemState> = states.iter().copied().filter(|s| s.q1 > 0 && s.phase == 1 && s.q2 < cap).collect();
    if controllable.len() > 16 {
        return Err(Error::InvalidModel(format!(
            "{} controllable states give too many decision vectors",
            controllable.len()
        )));
    }
    let decisions = (0..1usize << controllable.len())
        .map(|d| {
            let params = |s: TandemState| match controllable.iter().position(|&c| c == s) {
                Some(k) => {
                    let (a, p) = TANDEM_MODES[(d >> k) & 1];
                    TandemParams { a, b: 1.0 - a, p, ..base }
                }
                None => base,
            };
            tandem_rates(&states, index, |s| s == states[good], bad + 1, params, Overflow::To(bad))
        })
        .collect::<Result<Vec<_>>>()?;
    let start = index(TandemState { q1: cap, phase: 2, q2: 0 });
    Ctmdp::new(decisions, good, Some(bad), vec![start])
}

/// Dense random CTMC on `n` states: every off-diagonal rate is present with
/// probability `density` and drawn uniformly from `(0, 1)`. The last state
/// is the absorbing good state and state 0 is the target.
pub fn build_random_generator(n: usize, seed: u64, density: f64) -> Result<Ctmc> {
    if n < 2 {
        return Err(Error::InvalidModel("a random model needs at least two states".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidModel(format!("density {density} outside (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let good = n - 1;
    let mut trip = Vec::with_capacity(n * n);
    for i in 0..good {
        for j in 0..n {
            if i != j && (density >= 1.0 || rng.random_bool(density)) {
                // Open interval so that density 1 gives strictly positive rates.
                let v: f64 = rng.random_range(f64::EPSILON..1.0);
                trip.push((i, j, v));
            }
        }
    }
    Ctmc::new(RateMatrix::from_triplets(n, trip)?, good, None, vec![0])
}
