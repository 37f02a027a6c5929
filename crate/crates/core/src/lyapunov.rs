//! Diagonal Lyapunov certificates, the output-error envelope they induce,
//! and the entrywise perturbation bound for nearly lumpable chains.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::markov::{check_assumption1, ReachabilitySystem};
use crate::spectral::{perron_generator, perron_left_eigen, PerronData};

/// How a certificate's `M` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// `M = diag(ν)` from the left Perron vector, `κ = −ρ̄/2`.
    Perron,
    /// `M = diag(ν)` with `Aᵀν = −1` and the largest `κ` this `M` admits;
    /// used when `A` is stable but reducible.
    Stable,
    /// `M = I`.
    Identity,
}

/// A pair `(M, κ)` with `M ≻ 0`, `C_SᵀC_S ⪯ M` and
/// `MA + AᵀM + 2κM ⪯ 0`. `M` is always diagonal here.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub m_diag: DVector<f64>,
    pub kappa: f64,
    pub kind: CertificateKind,
}

impl Certificate {
    pub fn m(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.m_diag)
    }

    pub fn identity(m: usize, kappa: f64) -> Self {
        Self {
            m_diag: DVector::from_element(m, 1.0),
            kappa,
            kind: CertificateKind::Identity,
        }
    }
}

/// Which of the three matrix inequalities failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmiConstraint {
    PositiveDefinite,
    OutputDominance,
    Decay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LmiCheck {
    Feasible,
    /// `margin` is the offending extreme eigenvalue (negative for the first
    /// two constraints, positive for the decay constraint).
    Infeasible { constraint: LmiConstraint, margin: f64 },
}

impl LmiCheck {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LmiCheck::Feasible)
    }
}

/// Absolute tolerance on the extreme eigenvalues, scaled up for matrices
/// whose entries exceed one.
const LMI_TOL: f64 = 1e-10;

fn extreme_eigs(s: DMatrix<f64>) -> (f64, f64) {
    let sym = (&s + s.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym).eigenvalues;
    (e.min(), e.max())
}

/// Check `M ≻ 0`, `C_SᵀC_S ⪯ M` and `MA + AᵀM + 2κM ⪯ 0`.
pub fn verify_lmi(a: &DMatrix<f64>, m: &DMatrix<f64>, kappa: f64, targets: &[usize]) -> LmiCheck {
    let (mmin, _) = extreme_eigs(m.clone());
    let mscale = m.amax().max(1.0);
    if mmin <= 0.0 {
        return LmiCheck::Infeasible {
            constraint: LmiConstraint::PositiveDefinite,
            margin: mmin,
        };
    }
    let mut gap = m.clone();
    for &t in targets {
        gap[(t, t)] -= 1.0;
    }
    let (gmin, _) = extreme_eigs(gap);
    if gmin < -LMI_TOL * mscale {
        return LmiCheck::Infeasible {
            constraint: LmiConstraint::OutputDominance,
            margin: gmin,
        };
    }
    let ma = m * a;
    let scale = ma.amax().max(1.0);
    let (_, smax) = extreme_eigs(&ma + ma.transpose() + m * (2.0 * kappa));
    if smax > LMI_TOL * scale {
        return LmiCheck::Infeasible {
            constraint: LmiConstraint::Decay,
            margin: smax,
        };
    }
    LmiCheck::Feasible
}

fn checked(system: &ReachabilitySystem, cert: Certificate) -> Result<Certificate> {
    match verify_lmi(&system.a, &cert.m(), cert.kappa, &system.targets) {
        LmiCheck::Feasible => Ok(cert),
        LmiCheck::Infeasible { constraint, margin } => Err(Error::CertificateInvalid(format!(
            "{constraint:?} constraint fails with extreme eigenvalue {margin:e}"
        ))),
    }
}

/// `M = diag(ν)`, `κ = −ρ̄/2`, verified before it is returned.
pub fn certificate_from_perron(system: &ReachabilitySystem, perron: &PerronData) -> Result<Certificate> {
    if perron.nu.len() != system.m() {
        return Err(Error::InvalidModel("Perron vector has the wrong length".into()));
    }
    let cert = Certificate {
        m_diag: perron.nu.clone(),
        kappa: -0.5 * perron.rho_bar,
        kind: CertificateKind::Perron,
    };
    checked(system, cert)
}

/// Largest `κ` with `MA + AᵀM + 2κM ⪯ 0` for a fixed diagonal `M ≻ 0`:
/// `−½ λ_max(M^{-1/2}(MA + AᵀM)M^{-1/2})`.
pub fn best_kappa(a: &DMatrix<f64>, m_diag: &DVector<f64>) -> f64 {
    let n = a.nrows();
    let root = m_diag.map(f64::sqrt);
    let s = DMatrix::from_fn(n, n, |i, j| (m_diag[i] * a[(i, j)] + m_diag[j] * a[(j, i)]) / (root[i] * root[j]));
    -0.5 * extreme_eigs(s).1
}

/// Diagonal certificate for a stable `A` whose zero pattern is reducible.
/// `ν = −A⁻ᵀ1` is positive because `−A⁻¹` is entrywise nonnegative and
/// nonsingular, and `diag(ν)A + Aᵀdiag(ν)` is a symmetric Metzler matrix
/// with negative row sums, hence negative definite.
pub fn certificate_stable(system: &ReachabilitySystem) -> Result<Certificate> {
    let m = system.m();
    let nu = system
        .a
        .transpose()
        .lu()
        .solve(&DVector::from_element(m, -1.0))
        .ok_or_else(|| Error::AssumptionViolated("A is singular".into()))?;
    let min = nu.min();
    if !(min > 0.0) {
        return Err(Error::AssumptionViolated(format!("A is not stable: −A⁻ᵀ1 has entry {min:e}")));
    }
    let nu = nu / min;
    // Stay a hair inside the boundary so the check is not decided by roundoff.
    let kappa = best_kappa(&system.a, &nu) * (1.0 - 1e-9);
    if !(kappa > 0.0) {
        return Err(Error::CertificateInvalid(format!("no positive decay rate for the stable certificate ({kappa:e})")));
    }
    checked(
        system,
        Certificate {
            m_diag: nu,
            kappa,
            kind: CertificateKind::Stable,
        },
    )
}

/// The constructive certificate: Perron-based when the transient block is
/// strongly connected, the stable-matrix construction otherwise. The Perron
/// data comes from the cancellation-free iteration on `(−A)⁻ᵀ`, with power
/// iteration on `H` when that does not converge.
pub fn certificate(system: &ReachabilitySystem) -> Result<Certificate> {
    if !check_assumption1(system).holds() {
        return certificate_stable(system);
    }
    let slack = &system.beta + &system.chi;
    let m = system.m() as f64;
    let budget = ((PERRON_GENERATOR_FLOPS / (m * m)) as usize).max(500);
    let perron = match perron_generator(&system.a, &slack, system.gamma, budget) {
        Ok(p) => p,
        Err(Error::PerronNoConvergence { .. }) => perron_left_eigen(&system.h, system.gamma)?,
        Err(e) => return Err(e),
    };
    certificate_from_perron(system, &perron)
}

/// Work budget of the iteration on `(−A)⁻ᵀ`, in multiply-adds.
const PERRON_GENERATOR_FLOPS: f64 = 2e8;

/// `ξ = sqrt(λ_max(A⁻ᵀ M A⁻¹))` for diagonal `M`.
pub fn xi(a: &DMatrix<f64>, m_diag: &DVector<f64>) -> Result<f64> {
    let n = a.nrows();
    let y = a
        .clone()
        .lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::AssumptionViolated("A is singular".into()))?;
    let mut z = y;
    for i in 0..n {
        let w = m_diag[i].sqrt();
        z.row_mut(i).iter_mut().for_each(|v| *v *= w);
    }
    let (_, top) = extreme_eigs(z.transpose() * z);
    Ok(top.max(0.0).sqrt())
}

/// `ε(t) = coeff·e^{−κt}` with `coeff = ξ‖Γ‖₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEnvelope {
    pub coeff: f64,
    pub kappa: f64,
    pub xi: f64,
    pub gamma_norm: f64,
}

impl ErrorEnvelope {
    pub fn new(xi: f64, gamma_norm: f64, kappa: f64) -> Self {
        Self {
            coeff: xi * gamma_norm,
            kappa,
            xi,
            gamma_norm,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeff * (-self.kappa * t).exp()
    }
}

/// Envelope for the mismatch `Γ` under `cert`.
pub fn envelope(system: &ReachabilitySystem, cert: &Certificate, gamma: &DVector<f64>) -> Result<ErrorEnvelope> {
    Ok(ErrorEnvelope::new(xi(&system.a, &cert.m_diag)?, gamma.norm(), cert.kappa))
}

/// Entrywise bound `|eᵢ(t)| ≤ (m·ε + ρ₀)·Λᵢ` with `Λ` the row sums of
/// `−Â⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationBound {
    pub lambda_rowsums: DVector<f64>,
    pub eps: f64,
    pub rho0: f64,
}

impl PerturbationBound {
    pub fn bound(&self) -> DVector<f64> {
        let m = self.lambda_rowsums.len() as f64;
        &self.lambda_rowsums * (m * self.eps + self.rho0)
    }
}

pub fn perturbation_bound(a_hat: &DMatrix<f64>, eps: f64, rho0: f64) -> Result<PerturbationBound> {
    let m = a_hat.nrows();
    let lambda = a_hat
        .clone()
        .lu()
        .solve(&DVector::from_element(m, -1.0))
        .ok_or_else(|| Error::Singular("perturbed generator block is singular".into()))?;
    Ok(PerturbationBound {
        lambda_rowsums: lambda,
        eps,
        rho0,
    })
}
