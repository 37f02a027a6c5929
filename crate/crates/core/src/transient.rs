//! Trajectory evaluation: closed-form exponential sums for quasi-triangular
//! systems, an adaptive uniformisation baseline and a matrix-exponential
//! oracle.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::markov::ReachabilitySystem;
use crate::reduction::ReducedSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    /// `p(t)e^{λt}` with real `λ`.
    RealExp,
    /// `p(t)e^{at}cos(bt)` with `λ = a + ib`.
    CosExp,
    /// `p(t)e^{at}sin(bt)` with `λ = a + ib`.
    SinExp,
}

/// One term `p(t)·e^{Re λ t}·{1, cos, sin}(Im λ t)`; `poly[l]` multiplies
/// `t^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub lambda: Complex64,
    pub kind: TermKind,
    pub poly: Vec<f64>,
}

impl Term {
    pub fn eval(&self, t: f64) -> f64 {
        let p = self.poly.iter().rev().fold(0.0, |acc, c| acc * t + c);
        let e = (self.lambda.re * t).exp();
        match self.kind {
            TermKind::RealExp => p * e,
            TermKind::CosExp => p * e * (self.lambda.im * t).cos(),
            TermKind::SinExp => p * e * (self.lambda.im * t).sin(),
        }
    }
}

/// Closed-form solution of `dX̄/dt = ĀX̄`: `terms[i]` sums to `X̄ᵢ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpSum {
    pub terms: Vec<Vec<Term>>,
}

impl ExpSum {
    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        eval_expsum(self, t)
    }
}

pub fn eval_expsum(sum: &ExpSum, t: f64) -> DVector<f64> {
    DVector::from_iterator(sum.dim(), sum.terms.iter().map(|ts| ts.iter().map(|x| x.eval(t)).sum()))
}

type Poly = Vec<Complex64>;

/// Complex modal form of one state variable: `Σ_k poly_k(t) e^{λ_k t}`.
type Modal = Vec<(usize, Poly)>;

fn add_into(target: &mut Modal, mode: usize, poly: &[Complex64], scale: Complex64) {
    let slot = match target.iter().position(|(k, _)| *k == mode) {
        Some(i) => &mut target[i].1,
        None => {
            target.push((mode, Vec::new()));
            &mut target.last_mut().unwrap().1
        }
    };
    if slot.len() < poly.len() {
        slot.resize(poly.len(), Complex64::new(0.0, 0.0));
    }
    for (s, p) in slot.iter_mut().zip(poly) {
        *s += p * scale;
    }
}

struct Modes {
    lambdas: Vec<Complex64>,
    delta: f64,
}

impl Modes {
    fn find_or_add(&mut self, mu: Complex64) -> usize {
        if let Some(k) = self.lambdas.iter().position(|l| (l - mu).norm() < self.delta) {
            return k;
        }
        self.lambdas.push(mu);
        self.lambdas.len() - 1
    }
}

/// Solve `z' = μz + f(t)`, `z(0) = z0` for forcing in modal form.
fn solve_scalar(mu: Complex64, z0: Complex64, forcing: &Modal, modes: &mut Modes) -> Modal {
    let zero = Complex64::new(0.0, 0.0);
    let mut out: Modal = Vec::new();
    let mut at_zero = zero;
    for (k, q) in forcing {
        let lambda = modes.lambdas[*k];
        let d = lambda - mu;
        let mut r = vec![zero; q.len() + 1];
        if d.norm() < modes.delta {
            // Resonant forcing: r' = q.
            for (l, ql) in q.iter().enumerate() {
                r[l + 1] = ql / (l as f64 + 1.0);
            }
        } else {
            // (λ − μ) r + r' = q, from the top degree down.
            r.pop();
            for l in (0..q.len()).rev() {
                let next = if l + 1 < r.len() { r[l + 1] * (l as f64 + 1.0) } else { zero };
                r[l] = (q[l] - next) / d;
            }
        }
        at_zero += r[0];
        add_into(&mut out, *k, &r, Complex64::new(1.0, 0.0));
    }
    let home = modes.find_or_add(mu);
    add_into(&mut out, home, &[z0 - at_zero], Complex64::new(1.0, 0.0));
    out
}

/// Closed-form solution for a quasi-upper-triangular `Ā` whose 2×2
/// diagonal blocks hold complex pairs, by bottom-up substitution.
/// Eigenvalues closer than `1e-9·max(1, ‖Ā‖max)` are treated as equal and
/// give polynomial-in-`t` coefficients.
pub fn triangular_expsum(a_bar: &DMatrix<f64>, x_bar0: &DVector<f64>) -> Result<ExpSum> {
    let r = a_bar.nrows();
    if a_bar.ncols() != r || x_bar0.len() != r {
        return Err(Error::InvalidModel("dimension mismatch in the reduced system".into()));
    }
    let mut modes = Modes {
        lambdas: Vec::new(),
        delta: 1e-9 * a_bar.amax().max(1.0),
    };
    let mut starts = Vec::new();
    let mut i = 0;
    while i < r {
        starts.push(i);
        if i + 1 < r && a_bar[(i + 1, i)] != 0.0 {
            if i + 2 < r && a_bar[(i + 2, i + 1)] != 0.0 {
                return Err(Error::InvalidModel("matrix is not quasi-upper-triangular".into()));
            }
            i += 2;
        } else {
            i += 1;
        }
    }
    for c in 0..r {
        for row in c + 2..r {
            if a_bar[(row, c)] != 0.0 {
                return Err(Error::InvalidModel("matrix is not quasi-upper-triangular".into()));
            }
        }
    }
    let mut sol: Vec<Modal> = vec![Vec::new(); r];
    for &s in starts.iter().rev() {
        let sz = if s + 1 < r && a_bar[(s + 1, s)] != 0.0 { 2 } else { 1 };
        let forcing: Vec<Modal> = (s..s + sz)
            .map(|row| {
                let mut f: Modal = Vec::new();
                for j in s + sz..r {
                    let c = a_bar[(row, j)];
                    if c != 0.0 {
                        for (k, p) in &sol[j] {
                            add_into(&mut f, *k, p, Complex64::new(c, 0.0));
                        }
                    }
                }
                f
            })
            .collect();
        if sz == 1 {
            sol[s] = solve_scalar(Complex64::new(a_bar[(s, s)], 0.0), Complex64::new(x_bar0[s], 0.0), &forcing[0], &mut modes);
            continue;
        }
        let (b11, b12, b21, b22) = (a_bar[(s, s)], a_bar[(s, s + 1)], a_bar[(s + 1, s)], a_bar[(s + 1, s + 1)]);
        let half = 0.5 * (b11 - b22);
        let disc = half * half + b12 * b21;
        if disc >= 0.0 {
            return Err(Error::InvalidModel(format!("2x2 block at {s} has real eigenvalues")));
        }
        let lambda = Complex64::new(0.5 * (b11 + b22), (-disc).sqrt());
        // Columns of W: eigenvectors for λ and its conjugate.
        let v = [Complex64::new(b12, 0.0), lambda - b11];
        let w = [[v[0], v[0].conj()], [v[1], v[1].conj()]];
        let det = w[0][0] * w[1][1] - w[0][1] * w[1][0];
        let winv = [[w[1][1] / det, -w[0][1] / det], [-w[1][0] / det, w[0][0] / det]];
        let x0 = [Complex64::new(x_bar0[s], 0.0), Complex64::new(x_bar0[s + 1], 0.0)];
        let mut z = Vec::with_capacity(2);
        for (e, mu) in [lambda, lambda.conj()].into_iter().enumerate() {
            let mut g: Modal = Vec::new();
            for (row, f) in forcing.iter().enumerate() {
                for (k, p) in f {
                    add_into(&mut g, *k, p, winv[e][row]);
                }
            }
            let z0 = winv[e][0] * x0[0] + winv[e][1] * x0[1];
            z.push(solve_scalar(mu, z0, &g, &mut modes));
        }
        for row in 0..2 {
            let mut x: Modal = Vec::new();
            for (e, ze) in z.iter().enumerate() {
                for (k, p) in ze {
                    add_into(&mut x, *k, p, w[row][e]);
                }
            }
            sol[s + row] = x;
        }
    }
    let terms = sol
        .into_iter()
        .map(|modal| {
            let mut out = Vec::new();
            for (k, p) in modal {
                let lambda = modes.lambdas[k];
                if lambda.im == 0.0 {
                    out.push(Term {
                        lambda,
                        kind: TermKind::RealExp,
                        poly: p.iter().map(|c| c.re).collect(),
                    });
                } else if lambda.im > 0.0 {
                    out.push(Term {
                        lambda,
                        kind: TermKind::CosExp,
                        poly: p.iter().map(|c| 2.0 * c.re).collect(),
                    });
                    out.push(Term {
                        lambda,
                        kind: TermKind::SinExp,
                        poly: p.iter().map(|c| -2.0 * c.im).collect(),
                    });
                }
            }
            out
        })
        .collect();
    Ok(ExpSum { terms })
}

/// A reachability value with its certified radius. `raw` is unclamped;
/// `value` is clamped to `[0, 1]` and `[lower, upper]` is the certified
/// interval intersected with `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachInterval {
    pub raw: DVector<f64>,
    pub value: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub radius: f64,
}

/// Evaluates `d + C_S P X̄(t)` from a precomputed exponential sum.
#[derive(Debug, Clone)]
pub struct ReducedSolver {
    pub sum: ExpSum,
    output: DMatrix<f64>,
    offset: DVector<f64>,
    envelope: crate::lyapunov::ErrorEnvelope,
}

impl ReducedSolver {
    pub fn new(reduced: &ReducedSystem) -> Result<Self> {
        Ok(Self {
            sum: triangular_expsum(&reduced.a_bar, &reduced.x_bar0)?,
            output: reduced.output_map(),
            offset: reduced.offset.clone(),
            envelope: reduced.envelope,
        })
    }

    pub fn raw(&self, t: f64) -> DVector<f64> {
        &self.offset + &self.output * self.sum.eval(t)
    }

    pub fn at(&self, t: f64) -> ReachInterval {
        let raw = self.raw(t);
        let radius = self.envelope.eval(t);
        ReachInterval {
            value: raw.map(|v| v.clamp(0.0, 1.0)),
            lower: raw.map(|v| (v - radius).clamp(0.0, 1.0)),
            upper: raw.map(|v| (v + radius).clamp(0.0, 1.0)),
            raw,
            radius,
        }
    }

    pub fn solve(&self, times: &[f64]) -> SolveResult {
        let mut probs = DMatrix::zeros(self.offset.len(), times.len());
        let mut eps = Vec::with_capacity(times.len());
        for (c, &t) in times.iter().enumerate() {
            probs.set_column(c, &self.raw(t));
            eps.push(self.envelope.eval(t));
        }
        SolveResult {
            times: times.to_vec(),
            probs,
            eps,
        }
    }
}

pub fn reach_probability(reduced: &ReducedSystem, t: f64) -> Result<ReachInterval> {
    Ok(ReducedSolver::new(reduced)?.at(t))
}

/// Values on a time grid. `probs` holds raw values (one row per target
/// state); clamping to `[0, 1]` happens in `write_csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub times: Vec<f64>,
    pub probs: DMatrix<f64>,
    pub eps: Vec<f64>,
}

/// Format with 12 significant digits.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

impl SolveResult {
    /// CSV with header `t,prob_<s>…,eps`; `labels` names the target states.
    pub fn write_csv<W: Write>(&self, out: W, labels: &[usize]) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(labels.iter().map(|s| format!("prob_{s}")));
        header.push("eps".into());
        w.write_record(&header)?;
        for (c, &t) in self.times.iter().enumerate() {
            let mut row = vec![sig12(t)];
            row.extend(self.probs.column(c).iter().map(|v| sig12(v.clamp(0.0, 1.0))));
            row.push(sig12(self.eps.get(c).copied().unwrap_or(0.0)));
            w.write_record(&row)?;
        }
        w.flush()
    }
}

/// `n` log-spaced points over `[t_end·1e-4, t_end]`.
pub fn log_grid(t_end: f64, n: usize) -> Vec<f64> {
    assert!(t_end > 0.0 && n >= 1);
    if n == 1 {
        return vec![t_end];
    }
    let lo = (t_end * 1e-4).ln();
    let hi = t_end.ln();
    (0..n)
        .map(|k| {
            if k + 1 == n {
                t_end
            } else {
                (lo + (hi - lo) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Settings of the uniformisation baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformizationOptions {
    /// Total truncation error budget over `[0, T]`.
    pub trunc_tol: f64,
    /// Poisson terms per step.
    pub max_terms: usize,
    pub min_step: f64,
}

impl Default for UniformizationOptions {
    fn default() -> Self {
        Self {
            trunc_tol: 0.01,
            max_terms: 5,
            min_step: 1e-4,
        }
    }
}

/// Bookkeeping of a uniformisation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformizationReport {
    pub steps: usize,
    pub step: f64,
    pub matvecs: usize,
    /// Discarded Poisson tail mass summed over all steps.
    pub tail_mass: f64,
}

/// Poisson tail `P(N > k)` for mean `q`.
fn poisson_tail(q: f64, k: usize) -> f64 {
    let mut term = (-q).exp();
    let mut head = term;
    for j in 1..=k {
        term *= q / j as f64;
        head += term;
    }
    (1.0 - head).max(0.0)
}

/// Largest step with tail mass at most `tol·h/T`, by bisection.
fn uniformization_step(gamma: f64, t_end: f64, opts: &UniformizationOptions) -> Result<f64> {
    let ok = |h: f64| poisson_tail(gamma * h, opts.max_terms) <= opts.trunc_tol * h / t_end;
    if ok(t_end) {
        return Ok(t_end);
    }
    if !ok(opts.min_step) {
        let mut h = opts.min_step;
        while !ok(h) && h > f64::MIN_POSITIVE {
            h *= 0.5;
        }
        return Err(Error::UniformizationStepUnderflow {
            step: h,
            min_step: opts.min_step,
            time: 0.0,
        });
    }
    let (mut lo, mut hi) = (opts.min_step, t_end);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(lo)
}

/// Reachability probabilities of every transient state at each time in
/// `times` (sorted, nonnegative). Each step applies `K` Poisson-weighted
/// powers of `H = A/γ + I` to the augmented state `(v, 1)`; good keeps
/// value one and bad value zero.
pub fn uniformization_grid(
    system: &ReachabilitySystem,
    times: &[f64],
    opts: &UniformizationOptions,
) -> Result<(Vec<DVector<f64>>, UniformizationReport)> {
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    let m = system.m();
    let gamma = system.gamma;
    let input = &system.beta / gamma;
    let mut report = UniformizationReport {
        steps: 0,
        step: t_end,
        matvecs: 0,
        tail_mass: 0.0,
    };
    let mut out = Vec::with_capacity(times.len());
    let mut v = DVector::<f64>::zeros(m);
    if t_end == 0.0 {
        return Ok((times.iter().map(|_| v.clone()).collect(), report));
    }
    let h_max = uniformization_step(gamma, t_end, opts)?;
    report.step = h_max;
    let mut now = 0.0;
    let mut u = DVector::<f64>::zeros(m);
    let mut next = DVector::<f64>::zeros(m);
    let mut acc = DVector::<f64>::zeros(m);
    for &target in times {
        while target - now > 1e-15 * t_end.max(1.0) {
            let h = (target - now).min(h_max);
            let q = gamma * h;
            let mut weight = (-q).exp();
            u.copy_from(&v);
            acc.copy_from(&u);
            acc *= weight;
            let mut mass = weight;
            for k in 1..=opts.max_terms {
                next.copy_from(&input);
                next.gemv(1.0, &system.h, &u, 1.0);
                std::mem::swap(&mut u, &mut next);
                weight *= q / k as f64;
                acc.axpy(weight, &u, 1.0);
                mass += weight;
                report.matvecs += 1;
            }
            report.tail_mass += (1.0 - mass).max(0.0);
            v.copy_from(&acc);
            now += h;
            report.steps += 1;
        }
        out.push(v.clone());
    }
    Ok((out, report))
}

/// Reachability probabilities of the target states at `t_end`.
pub fn uniformization_solve(
    system: &ReachabilitySystem,
    t_end: f64,
    opts: &UniformizationOptions,
) -> Result<(DVector<f64>, UniformizationReport)> {
    let (mut v, report) = uniformization_grid(system, &[t_end], opts)?;
    Ok((system.select(&v.pop().unwrap()), report))
}

/// `e^{At}v` by scaling and squaring with a Padé approximant.
pub fn oracle_expm(a: &DMatrix<f64>, v: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    let scaled = a * t;
    if scaled.iter().any(|x| !x.is_finite()) {
        return Err(Error::OracleOverflow);
    }
    let y = scaled.exp() * v;
    if y.iter().all(|x| x.is_finite()) {
        Ok(y)
    } else {
        Err(Error::OracleOverflow)
    }
}

/// Full-order reachability `C_S e^{At}A⁻¹β + d` via the oracle.
pub fn oracle_reach(system: &ReachabilitySystem, t: f64) -> Result<DVector<f64>> {
    Ok(system.select(&oracle_expm(&system.a, &system.steady, t)?) + &system.offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{example2_perturbed, example2_unperturbed};
    use crate::markov::{build_reachability_system, Ctmc, RateMatrix};
    use crate::reduction::reduce_ctmc;
    use crate::spectral::real_schur;
    use crate::spectral::testing::random_matrix;
    use crate::testing::random_system;
    use proptest::prelude::*;

    fn close(a: &DVector<f64>, b: &DVector<f64>, rel: f64) -> bool {
        (a - b).iter().zip(b.iter()).all(|(d, x)| d.abs() <= rel * x.abs() + 1e-12)
    }

    #[test]
    fn diagonal_sum() {
        let a = DMatrix::from_diagonal(&DVector::from_row_slice(&[-1.0, -2.0]));
        let s = triangular_expsum(&a, &DVector::from_row_slice(&[1.0, 1.0])).unwrap();
        assert_eq!(s.terms[0], vec![Term { lambda: Complex64::new(-1.0, 0.0), kind: TermKind::RealExp, poly: vec![1.0] }]);
        assert_eq!(s.terms[1], vec![Term { lambda: Complex64::new(-2.0, 0.0), kind: TermKind::RealExp, poly: vec![1.0] }]);
        assert!(s.eval(60.0).amax() < 1e-20);
    }

    #[test]
    fn jordan_block_is_polynomial() {
        // Triple eigenvalue −1 in a single chain: x₀(t) = (1 + t + t²/2)e^{−t}.
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0, -1.0]);
        let x0 = DVector::from_element(3, 1.0);
        let s = triangular_expsum(&a, &x0).unwrap();
        assert_eq!(s.terms[0].len(), 1);
        let poly = &s.terms[0][0].poly;
        for (g, w) in poly.iter().zip([1.0, 1.0, 0.5]) {
            assert!((g - w).abs() < 1e-14);
        }
        for t in [0.0, 0.5, 2.0, 7.0] {
            assert!(close(&s.eval(t), &oracle_expm(&a, &x0, t).unwrap(), 1e-10));
        }
    }

    #[test]
    fn rotation_block() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 2.0, -2.0, -0.5]);
        let x0 = DVector::from_row_slice(&[1.0, 0.0]);
        let s = triangular_expsum(&a, &x0).unwrap();
        for t in [0.0f64, 0.3, 1.7, 5.0] {
            let want = DVector::from_row_slice(&[(-0.5 * t).exp() * (2.0 * t).cos(), -(-0.5 * t).exp() * (2.0 * t).sin()]);
            assert!((s.eval(t) - want).amax() < 1e-13);
        }
    }

    #[test]
    fn oracle_basics() {
        let e = oracle_expm(&DMatrix::from_element(1, 1, -1.0), &DVector::from_element(1, 1.0), 1.0).unwrap();
        assert!((e[0] - (-1f64).exp()).abs() < 1e-15);
        let n = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = oracle_expm(&n, &DVector::from_row_slice(&[0.0, 1.0]), 2.0).unwrap();
        assert!((e - DVector::from_row_slice(&[2.0, 1.0])).amax() < 1e-14);
        let big = DMatrix::from_element(1, 1, 1e3);
        assert_eq!(oracle_expm(&big, &DVector::from_element(1, 1.0), 1.0).unwrap_err(), Error::OracleOverflow);
    }

    #[test]
    fn exact_reduction_matches_oracle() {
        let sys = build_reachability_system(&example2_unperturbed()).unwrap();
        let red = reduce_ctmc(&sys, 1.0, 0.0).unwrap();
        let solver = ReducedSolver::new(&red).unwrap();
        for k in 0..50 {
            let t = 0.2 * k as f64;
            let want = oracle_reach(&sys, t).unwrap();
            assert!((solver.raw(t) - want).amax() < 1e-10);
        }
        assert!(solver.raw(0.0).amax() < 1e-12);
    }

    #[test]
    fn single_state_uniformization() {
        let m = Ctmc::new(RateMatrix::from_triplets(2, [(0, 1, 1.0)]).unwrap(), 1, None, vec![0]).unwrap();
        let sys = build_reachability_system(&m).unwrap();
        let opts = UniformizationOptions::default();
        let (p, rep) = uniformization_solve(&sys, 1.0, &opts).unwrap();
        assert!((p[0] - (1.0 - (-1f64).exp())).abs() <= opts.trunc_tol);
        assert!(rep.tail_mass <= opts.trunc_tol);
    }

    #[test]
    fn uniformization_tracks_reduction() {
        let sys = build_reachability_system(&example2_perturbed()).unwrap();
        let red = reduce_ctmc(&sys, 1.0, 0.01).unwrap();
        let opts = UniformizationOptions::default();
        let (p, _) = uniformization_solve(&sys, 1.0, &opts).unwrap();
        let r = reach_probability(&red, 1.0).unwrap();
        assert!((p - r.raw).amax() <= r.radius + opts.trunc_tol);
    }

    #[test]
    fn uniformization_on_larger_model() {
        let sys = random_system(100, 5);
        let opts = UniformizationOptions::default();
        let times = [0.5, 2.0, 5.0];
        let (vals, rep) = uniformization_grid(&sys, &times, &opts).unwrap();
        assert!(rep.tail_mass <= opts.trunc_tol);
        for (v, &t) in vals.iter().zip(&times) {
            let want = oracle_expm(&sys.a, &sys.steady, t).unwrap() - &sys.steady;
            assert!((v - want).amax() <= opts.trunc_tol);
        }
    }

    #[test]
    fn step_underflow() {
        let opts = UniformizationOptions { min_step: 0.5, ..Default::default() };
        let err = uniformization_step(1e3, 10.0, &opts).unwrap_err();
        assert!(matches!(err, Error::UniformizationStepUnderflow { .. }));
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(sig12(0.5), "0.5");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(1234.5), "1234.5");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(1e-9), "1.00000000000e-9");
    }

    #[test]
    fn csv_layout() {
        let res = SolveResult {
            times: vec![0.5, 1.0],
            probs: DMatrix::from_row_slice(1, 2, &[-1e-12, 0.25]),
            eps: vec![0.1, 0.05],
        };
        let mut buf = Vec::new();
        res.write_csv(&mut buf, &[3]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,prob_3,eps\n0.5,0,0.1\n1,0.25,0.05\n");
    }

    fn stable_quasi_triangular(m: usize, seed: u64) -> DMatrix<f64> {
        let f = real_schur(&(random_matrix(m, seed) - DMatrix::identity(m, m) * 2.5)).unwrap();
        f.n
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]
        #[test]
        fn expsum_matches_oracle(seed in any::<u64>(), m in 1usize..9) {
            let a = stable_quasi_triangular(m, seed);
            let x0 = random_matrix(m, seed ^ 1).column(0).into_owned();
            let s = triangular_expsum(&a, &x0).unwrap();
            prop_assert!((s.eval(0.0) - &x0).amax() < 1e-10);
            for k in 0..20 {
                let t = 0.25 * k as f64;
                let want = oracle_expm(&a, &x0, t).unwrap();
                prop_assert!(close(&s.eval(t), &want, 1e-8), "t={}", t);
            }
        }

        #[test]
        fn repeated_eigenvalues(seed in any::<u64>(), mult in 2usize..4) {
            // Upper triangular with eigenvalue −1 repeated `mult` times and a
            // distinct −2, random couplings.
            let m = mult + 1;
            let r = random_matrix(m, seed);
            let mut a = DMatrix::zeros(m, m);
            for i in 0..m {
                a[(i, i)] = if i < mult { -1.0 } else { -2.0 };
                for j in i + 1..m {
                    a[(i, j)] = r[(i, j)];
                }
            }
            let x0 = r.column(0).into_owned();
            let s = triangular_expsum(&a, &x0).unwrap();
            for k in 0..20 {
                let t = 0.5 * k as f64;
                prop_assert!(close(&s.eval(t), &oracle_expm(&a, &x0, t).unwrap(), 1e-8));
            }
        }

        #[test]
        fn reach_values_stay_in_band(seed in any::<u64>(), m in 2usize..10) {
            let sys = random_system(m, seed);
            let red = reduce_ctmc(&sys, 1.0, 0.05).unwrap();
            let solver = ReducedSolver::new(&red).unwrap();
            for k in 0..20 {
                let t = 0.3 * k as f64;
                let v = solver.at(t);
                let slack = v.radius + 1e-9;
                prop_assert!(v.raw.iter().all(|&x| x >= -slack && x <= 1.0 + slack));
            }
        }
    }
}
