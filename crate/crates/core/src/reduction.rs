//! Projection-based order reduction with a certified output error, and the
//! exact lumping projection of a probabilistic bisimulation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lyapunov::{certificate, xi, Certificate, ErrorEnvelope};
use crate::markov::ReachabilitySystem;
use crate::spectral::{dominant_order, modal_scores, real_schur, score_order, BlockOrderer, SchurFactors};

/// `dX̄/dt = ĀX̄` with `X ≈ PX̄`; the reduced reachability probabilities are
/// `C_S P X̄(t) + d`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub a_bar: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub x_bar0: DVector<f64>,
    /// `ĀX̄₀`.
    pub beta_bar: DVector<f64>,
    pub r: usize,
    pub envelope: ErrorEnvelope,
    /// `d = −C_S A⁻¹β`, shared with the full system.
    pub offset: DVector<f64>,
    pub targets: Vec<usize>,
}

impl ReducedSystem {
    /// `C_S P`, the output map of the reduced state.
    pub fn output_map(&self) -> DMatrix<f64> {
        self.p.select_rows(self.targets.iter())
    }
}

/// How the order search ranks Schur blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    /// By modal contribution to `β` (negligible modes last, by real part).
    #[default]
    Contribution,
    /// By decreasing real part.
    Dominant,
}

/// `Ā` = leading `r×r` block of `N`, `P` = first `r` columns of `U`.
pub fn project(factors: &SchurFactors, r_eff: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    assert!(r_eff >= 1 && r_eff <= factors.dim());
    let a_bar = factors.n.view((0, 0), (r_eff, r_eff)).into_owned();
    let p = factors.u.columns(0, r_eff).into_owned();
    (a_bar, p)
}

/// `X̄₀ = (PᵀMP)⁻¹PᵀMX₀`, the `M`-weighted least-squares fit of `X₀`.
pub fn initial_state(p: &DMatrix<f64>, m_diag: &DVector<f64>, x0: &DVector<f64>) -> Result<DVector<f64>> {
    let mut mp = p.clone();
    for (i, mut row) in mp.row_iter_mut().enumerate() {
        row *= m_diag[i];
    }
    let gram = p.transpose() * &mp;
    let rhs = mp.transpose() * x0;
    gram.cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Singular("PᵀMP is not positive definite".into()))
}

/// `Γ = β − Pβ̄`.
pub fn mismatch(system: &ReachabilitySystem, p: &DMatrix<f64>, beta_bar: &DVector<f64>) -> DVector<f64> {
    &system.beta - p * beta_bar
}

/// `‖Γ‖₂` at or below this is treated as an exact match: the residual left
/// by rounding in an exactly invariant subspace.
pub fn exact_mismatch_floor(system: &ReachabilitySystem) -> f64 {
    1e-10 * system.beta.norm().max(1.0)
}

/// Smallest order (scanning block by block) whose envelope at `t_end` is
/// at most `eps_max`, using the constructive certificate and contribution
/// ordering.
pub fn reduce_ctmc(system: &ReachabilitySystem, t_end: f64, eps_max: f64) -> Result<ReducedSystem> {
    let cert = certificate(system)?;
    reduce_ctmc_with(system, &cert, t_end, eps_max, Ordering::Contribution)
}

/// Cholesky factor of `PᵀMP` grown one column at a time.
struct GrowingGram {
    cols: Vec<DVector<f64>>,
    /// Row `k` holds `L[k][0..=k]`.
    l: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl GrowingGram {
    fn push(&mut self, col: DVector<f64>, m_diag: &DVector<f64>, x0: &DVector<f64>) -> Result<()> {
        let mcol = col.component_mul(m_diag);
        let g: Vec<f64> = self.cols.iter().map(|c| c.dot(&mcol)).collect();
        let mut row = Vec::with_capacity(g.len() + 1);
        for (k, gk) in g.iter().enumerate() {
            let s: f64 = (0..k).map(|j| self.l[k][j] * row[j]).sum();
            row.push((gk - s) / self.l[k][k]);
        }
        let d = col.dot(&mcol) - row.iter().map(|v| v * v).sum::<f64>();
        if !(d > 0.0) {
            return Err(Error::Singular("PᵀMP lost positive definiteness".into()));
        }
        row.push(d.sqrt());
        self.l.push(row);
        self.rhs.push(mcol.dot(x0));
        self.cols.push(col);
        Ok(())
    }

    fn solve(&self) -> DVector<f64> {
        let r = self.l.len();
        let mut y = vec![0.0; r];
        for k in 0..r {
            let s: f64 = (0..k).map(|j| self.l[k][j] * y[j]).sum();
            y[k] = (self.rhs[k] - s) / self.l[k][k];
        }
        for k in (0..r).rev() {
            let s: f64 = (k + 1..r).map(|j| self.l[j][k] * y[j]).sum();
            y[k] = (y[k] - s) / self.l[k][k];
        }
        DVector::from_vec(y)
    }
}

/// Order search with a given certificate and block ordering. One Schur
/// factorisation is computed; blocks are moved to the front one at a time
/// and the envelope is evaluated after each move. The full order always
/// qualifies because its mismatch vanishes.
pub fn reduce_ctmc_with(
    system: &ReachabilitySystem,
    cert: &Certificate,
    t_end: f64,
    eps_max: f64,
    ordering: Ordering,
) -> Result<ReducedSystem> {
    let floor = exact_mismatch_floor(system);
    search(system, cert, ordering, |_, env| env.eval(t_end) <= eps_max || env.gamma_norm <= floor)
}

/// Reduction at a requested order `r`; the order grows by one when the cut
/// would split a complex pair.
pub fn reduce_ctmc_order(system: &ReachabilitySystem, cert: &Certificate, r: usize, ordering: Ordering) -> Result<ReducedSystem> {
    search(system, cert, ordering, |k, _| k >= r)
}

fn search(
    system: &ReachabilitySystem,
    cert: &Certificate,
    ordering: Ordering,
    accept: impl Fn(usize, &ErrorEnvelope) -> bool,
) -> Result<ReducedSystem> {
    let m = system.m();
    let x0 = &system.steady;
    let factors = real_schur(&system.a)?;
    let order = match ordering {
        Ordering::Contribution => score_order(&factors, &modal_scores(&factors, &(factors.u.transpose() * x0))),
        Ordering::Dominant => dominant_order(&factors),
    };
    let xi = xi(&system.a, &cert.m_diag)?;
    let mut orderer = BlockOrderer::new(&factors);
    let mut gram = GrowingGram {
        cols: Vec::new(),
        l: Vec::new(),
        rhs: Vec::new(),
    };
    for (pos, &id) in order.iter().enumerate() {
        orderer.move_to_front(id, pos)?;
        let r = orderer.leading_dim(pos + 1);
        for j in gram.cols.len()..r {
            gram.push(orderer.u_column(j), &cert.m_diag, x0)?;
        }
        let x_bar0 = gram.solve();
        let (p, a_bar) = orderer.leading(r);
        let beta_bar = &a_bar * &x_bar0;
        let gamma = mismatch(system, &p, &beta_bar);
        let gnorm = gamma.norm();
        let envelope = ErrorEnvelope::new(xi, gnorm, cert.kappa);
        if r == m || accept(r, &envelope) {
            return Ok(ReducedSystem {
                a_bar,
                p,
                x_bar0,
                beta_bar,
                r,
                envelope,
                offset: system.offset.clone(),
                targets: system.targets.clone(),
            });
        }
    }
    unreachable!("the last block always reaches full order")
}

/// Disjoint state sets covering `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LumpingPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl LumpingPartition {
    pub fn new(blocks: Vec<Vec<usize>>, m: usize) -> Result<Self> {
        let mut seen = vec![false; m];
        for b in &blocks {
            if b.is_empty() {
                return Err(Error::InvalidModel("empty partition block".into()));
            }
            for &s in b {
                if s >= m || seen[s] {
                    return Err(Error::InvalidModel(format!("state {s} is out of range or repeated")));
                }
                seen[s] = true;
            }
        }
        if let Some(s) = seen.iter().position(|&v| !v) {
            return Err(Error::InvalidModel(format!("state {s} is in no block")));
        }
        Ok(Self { blocks })
    }

    pub fn singletons(m: usize) -> Self {
        Self {
            blocks: (0..m).map(|s| vec![s]).collect(),
        }
    }

    /// 0/1 membership matrix.
    pub fn membership(&self, m: usize) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(m, self.blocks.len());
        for (k, b) in self.blocks.iter().enumerate() {
            for &s in b {
                p[(s, k)] = 1.0;
            }
        }
        p
    }
}

/// Quotient of a reachability system by an exact bisimulation:
/// `AP = PĀ`, `β = Pβ̄` and `X(t) = PX̄(t)`.
#[derive(Debug, Clone)]
pub struct Lumped {
    pub p: DMatrix<f64>,
    pub a_bar: DMatrix<f64>,
    pub beta_bar: DVector<f64>,
}

/// Tolerance on row constancy of `AP` and `β` within a block.
const LUMP_TOL: f64 = 1e-12;

pub fn lumping_projection(partition: &LumpingPartition, system: &ReachabilitySystem) -> Result<Lumped> {
    let m = system.m();
    let partition = LumpingPartition::new(partition.blocks.clone(), m)?;
    let p = partition.membership(m);
    let ap = &system.a * &p;
    let k = partition.blocks.len();
    let mut a_bar = DMatrix::zeros(k, k);
    let mut beta_bar = DVector::zeros(k);
    for (b, states) in partition.blocks.iter().enumerate() {
        let first = states[0];
        for &s in &states[1..] {
            let row_gap = (ap.row(s) - ap.row(first)).amax();
            let beta_gap = (system.beta[s] - system.beta[first]).abs();
            if row_gap > LUMP_TOL || beta_gap > LUMP_TOL {
                return Err(Error::NotABisimulation {
                    block: b,
                    first,
                    second: s,
                });
            }
        }
        a_bar.row_mut(b).copy_from(&ap.row(first));
        beta_bar[b] = system.beta[first];
    }
    Ok(Lumped { p, a_bar, beta_bar })
}
