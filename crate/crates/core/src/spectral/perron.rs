//! Perron root and left Perron vector of the uniformised matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spectral::schur::real_schur;

/// Perron data of `H = A/γ + I`.
#[derive(Debug, Clone)]
pub struct PerronData {
    /// Perron root `ρ` of `H`.
    pub rho: f64,
    /// `ρ̄ = −γ(1 − ρ)`, the dominant (real) eigenvalue of `A`.
    pub rho_bar: f64,
    /// Positive left Perron vector scaled so that its smallest entry is 1.
    pub nu: DVector<f64>,
    /// Relative residual `‖Hᵀν − ρν‖∞ / (‖H‖∞ ‖ν‖∞)`.
    pub residual: f64,
    pub iterations: usize,
}

const TOL: f64 = 1e-12;

fn relative_residual(ht: &DMatrix<f64>, nu: &DVector<f64>, rho: f64, hnorm: f64) -> f64 {
    (ht * nu - nu * rho).amax() / (hnorm * nu.amax()).max(f64::MIN_POSITIVE)
}

/// Left Perron eigenpair of the nonnegative irreducible matrix `h`.
///
/// Power iteration on `(H + I)ᵀ` (aperiodic even when `H` is not) gives a
/// starting estimate, refined by shifted inverse iteration until the
/// relative residual drops below `1e-12`.
pub fn perron_left_eigen(h: &DMatrix<f64>, gamma: f64) -> Result<PerronData> {
    let m = h.nrows();
    let ht = h.transpose();
    let hnorm = h.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    if hnorm == 0.0 {
        // H = 0 forces every ν; the uniform vector is the canonical choice.
        return Ok(PerronData {
            rho: 0.0,
            rho_bar: -gamma,
            nu: DVector::from_element(m, 1.0),
            residual: 0.0,
            iterations: 0,
        });
    }
    let mut nu = DVector::from_element(m, 1.0 / m as f64);
    let mut rho = 0.0;
    let mut iterations = 0;
    let cap = 100 * m.max(10);
    while iterations < cap {
        iterations += 1;
        let next = &ht * &nu + &nu;
        let s = next.sum();
        rho = s / nu.sum() - 1.0;
        nu = next / s;
        if relative_residual(&ht, &nu, rho, hnorm) < 1e-6 {
            break;
        }
    }
    let mut residual = relative_residual(&ht, &nu, rho, hnorm);
    let mut shift = rho;
    for _ in 0..50 {
        if residual <= TOL {
            break;
        }
        iterations += 1;
        let mut shifted = ht.clone();
        for i in 0..m {
            shifted[(i, i)] -= shift;
        }
        let next = match shifted.lu().solve(&nu) {
            Some(x) if x.iter().all(|v| v.is_finite()) => x,
            _ => {
                shift += 1e-13 * hnorm;
                continue;
            }
        };
        let norm = next.sum();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        nu = next / norm;
        rho = nu.dot(&(&ht * &nu)) / nu.dot(&nu);
        shift = rho;
        residual = relative_residual(&ht, &nu, rho, hnorm);
    }
    if residual > TOL {
        return Err(Error::PerronNoConvergence { iterations, residual });
    }
    let min = nu.min();
    if min <= 1e-14 * nu.amax() {
        return Err(Error::AssumptionViolated(format!(
            "left Perron vector has a nonpositive entry ({min:e}); H is reducible"
        )));
    }
    nu /= min;
    Ok(PerronData {
        rho,
        rho_bar: -gamma * (1.0 - rho),
        nu,
        residual,
        iterations,
    })
}

/// Subtraction-free LU of the nonsingular M-matrix `B = −A` with row-sum
/// slack `s = B·1 ≥ 0`: each pivot is rebuilt as its slack plus the
/// magnitudes of the active off-diagonal row entries, so no step cancels
/// and solves with nonnegative right-hand sides keep full relative accuracy.
struct MMatrixLu {
    /// Strict lower part holds `L` (unit diagonal implied), the rest `U`.
    w: DMatrix<f64>,
}

impl MMatrixLu {
    fn new(a: &DMatrix<f64>, slack: &DVector<f64>) -> Result<Self> {
        let m = a.nrows();
        let mut w = -a;
        let mut s = slack.clone();
        for k in 0..m {
            let p = s[k] + (k + 1..m).map(|j| -w[(k, j)]).sum::<f64>();
            if !(p > 0.0) {
                return Err(Error::Singular(format!("zero pivot at state {k}: no exit is reachable")));
            }
            w[(k, k)] = p;
            for i in k + 1..m {
                let l = w[(i, k)] / p;
                if l == 0.0 {
                    continue;
                }
                w[(i, k)] = l;
                for j in k + 1..m {
                    if j != i {
                        let u = w[(k, j)];
                        w[(i, j)] -= l * u;
                    }
                }
                s[i] -= l * s[k];
            }
        }
        Ok(Self { w })
    }

    /// `x = B⁻ᵀ v` for `v ≥ 0`.
    fn solve_transpose(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = v.len();
        let w = &self.w;
        let mut y = v.clone();
        for k in 0..m {
            let acc: f64 = (0..k).map(|j| -w[(j, k)] * y[j]).sum();
            y[k] = (y[k] + acc) / w[(k, k)];
        }
        for k in (0..m).rev() {
            let acc: f64 = (k + 1..m).map(|j| -w[(j, k)] * y[j]).sum();
            y[k] += acc;
        }
        y
    }
}

/// Left Perron data of an irreducible generator block `A` from power
/// iteration on `(−A)⁻ᵀ`, whose entries are nonnegative and computed
/// without cancellation. `slack` is the exit-rate vector `−A·1`. This keeps
/// relative accuracy when `1 − ρ` is below machine precision or `ν` spans
/// many orders of magnitude. Convergence is declared once the
/// Collatz–Wielandt bracket of the Perron root of `(−A)⁻¹` is tighter than
/// `max(1e-13, 10·m·eps)` relative; `residual` reports that width.
pub fn perron_generator(a: &DMatrix<f64>, slack: &DVector<f64>, gamma: f64, max_iter: usize) -> Result<PerronData> {
    let m = a.nrows();
    if m == 0 {
        return Err(Error::InvalidModel("empty generator block".into()));
    }
    let lu = MMatrixLu::new(a, slack)?;
    let tol = (10.0 * m as f64 * f64::EPSILON).max(1e-13);
    let mut v = DVector::from_element(m, 1.0);
    let mut width = f64::INFINITY;
    for it in 1..=max_iter {
        let w = lu.solve_transpose(&v);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..m {
            let q = w[i] / v[i];
            lo = lo.min(q);
            hi = hi.max(q);
        }
        width = hi / lo - 1.0;
        let scale = w.max();
        if !(scale > 0.0 && w.min() > 0.0) {
            return Err(Error::AssumptionViolated("left Perron vector underflows; A is reducible".into()));
        }
        v = w / scale;
        if width <= tol {
            let root = 0.5 * (lo + hi);
            let rho_bar = -1.0 / root;
            let min = v.min();
            return Ok(PerronData {
                rho: 1.0 + rho_bar / gamma,
                rho_bar,
                nu: v / min,
                residual: width,
                iterations: it,
            });
        }
    }
    Err(Error::PerronNoConvergence {
        iterations: max_iter,
        residual: width,
    })
}

/// Largest real part over the spectrum of `a`.
pub fn stability_margin(a: &DMatrix<f64>) -> Result<f64> {
    let f = real_schur(a)?;
    Ok(f.eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max))
}
