use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::markov::graph::{backward_reachable, sccs};
use crate::markov::model::{Ctmc, Ctmdp};

/// The affine system `dX/dt = A X` obtained from a CTMC once good and bad
/// are absorbing, with `X = Z_S + A⁻¹β` and `Prob(t) = C_S X(t) + d`.
///
/// Transient states keep their input order; `states[k]` is the original
/// index of row `k`.
#[derive(Debug, Clone)]
pub struct ReachabilitySystem {
    pub a: DMatrix<f64>,
    /// Rates into good.
    pub beta: DVector<f64>,
    /// Rates into bad (zero when the model has no bad state).
    pub chi: DVector<f64>,
    /// Rows of the selection matrix `C_S`, as indices into `0..m`.
    pub targets: Vec<usize>,
    pub states: Vec<usize>,
    /// `A⁻¹β`, the value of `X` at time zero.
    pub steady: DVector<f64>,
    /// `d = −C_S A⁻¹β`.
    pub offset: DVector<f64>,
    pub gamma: f64,
    pub h: DMatrix<f64>,
}

impl ReachabilitySystem {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn c_s(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.targets.len(), self.m());
        for (row, &col) in self.targets.iter().enumerate() {
            c[(row, col)] = 1.0;
        }
        c
    }

    /// `C_S v` without forming `C_S`.
    pub fn select(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.targets.len(), self.targets.iter().map(|&k| v[k]))
    }

    /// Build a system directly from `(A, β, χ)`; used for CTMDP decisions and
    /// in tests. Rows of `[A | χ | β]` must sum to zero.
    pub fn from_parts(
        a: DMatrix<f64>,
        beta: DVector<f64>,
        chi: DVector<f64>,
        targets: Vec<usize>,
    ) -> Result<Self> {
        let m = a.nrows();
        if a.ncols() != m || beta.len() != m || chi.len() != m || m == 0 {
            return Err(Error::InvalidModel("inconsistent system dimensions".into()));
        }
        if targets.iter().any(|&t| t >= m) {
            return Err(Error::InvalidModel("target row out of range".into()));
        }
        if beta.iter().chain(chi.iter()).all(|&v| v == 0.0) {
            return Err(Error::TrivialProblem);
        }
        let mut adj = vec![Vec::new(); m + 1];
        for i in 0..m {
            for j in 0..m {
                if i != j && a[(i, j)] > 0.0 {
                    adj[i].push(j);
                }
            }
            if beta[i] > 0.0 || chi[i] > 0.0 {
                adj[i].push(m);
            }
        }
        let exits = backward_reachable(&adj, &[m]);
        if let Some(s) = (0..m).find(|&s| !exits[s]) {
            return Err(Error::AssumptionViolated(format!(
                "transient state {s} cannot leave the transient set, so A is singular"
            )));
        }
        let steady = a
            .clone()
            .lu()
            .solve(&beta)
            .ok_or_else(|| Error::AssumptionViolated("A is singular".into()))?;
        let offset = DVector::from_iterator(targets.len(), targets.iter().map(|&k| -steady[k]));
        let (h, gamma) = uniformize(&a)?;
        Ok(Self {
            a,
            beta,
            chi,
            states: (0..m).collect(),
            targets,
            steady,
            offset,
            gamma,
            h,
        })
    }
}

pub fn build_reachability_system(model: &Ctmc) -> Result<ReachabilitySystem> {
    let transient = model.transient_states();
    let n = model.n_states();
    let mut pos = vec![usize::MAX; n];
    for (k, &s) in transient.iter().enumerate() {
        pos[s] = k;
    }
    let m = transient.len();
    let mut a = DMatrix::zeros(m, m);
    let mut beta = DVector::zeros(m);
    let mut chi = DVector::zeros(m);
    for &(i, j, v) in model.rates().entries() {
        let row = pos[i];
        if row == usize::MAX {
            continue; // good and bad are absorbing
        }
        a[(row, row)] -= v;
        if j == model.good() {
            beta[row] += v;
        } else if Some(j) == model.bad() {
            chi[row] += v;
        } else {
            a[(row, pos[j])] += v;
        }
    }
    let targets = model.targets().iter().map(|&s| pos[s]).collect();
    let mut sys = ReachabilitySystem::from_parts(a, beta, chi, targets)?;
    sys.states = transient;
    Ok(sys)
}

/// `H = A/γ + I` with `γ = maxᵢ |aᵢᵢ|`.
pub fn uniformize(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let gamma = a.diagonal().iter().fold(0.0f64, |g, v| g.max(v.abs()));
    if a.nrows() == 0 || gamma == 0.0 {
        return Err(Error::DegenerateGenerator);
    }
    let mut h = a / gamma;
    for i in 0..h.nrows() {
        h[(i, i)] += 1.0;
    }
    Ok((h, gamma))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assumption1 {
    Holds,
    NotStronglyConnected { components: usize },
    NoExit,
}

impl Assumption1 {
    pub fn holds(&self) -> bool {
        *self == Assumption1::Holds
    }
}

/// Strong connectivity of the exact zero pattern of `H`, plus at least one
/// transition into good or bad.
pub fn check_assumption1(system: &ReachabilitySystem) -> Assumption1 {
    let m = system.m();
    let adj: Vec<Vec<usize>> = (0..m)
        .map(|i| (0..m).filter(|&j| j != i && system.a[(i, j)] > 0.0).collect())
        .collect();
    let comps = sccs(&adj).len();
    if comps != 1 {
        return Assumption1::NotStronglyConnected { components: comps };
    }
    if system.beta.iter().chain(system.chi.iter()).all(|&v| v == 0.0) {
        return Assumption1::NoExit;
    }
    Assumption1::Holds
}

/// One reachability system per decision vector. Every `A_d` must be
/// stable; the offending decision is named otherwise.
pub fn build_switched_partition(model: &Ctmdp) -> Result<Vec<ReachabilitySystem>> {
    (0..model.n_decisions())
        .map(|d| {
            build_reachability_system(&model.decision_ctmc(d)).map_err(|e| match e {
                Error::AssumptionViolated(msg) | Error::InvalidModel(msg) => {
                    Error::AssumptionViolated(format!("decision {d}: {msg}"))
                }
                Error::TrivialProblem => Error::AssumptionViolated(format!(
                    "decision {d}: no transition into good or bad, A_d is singular"
                )),
                other => other,
            })
        })
        .collect()
}
