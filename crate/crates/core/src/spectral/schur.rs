//! Real Schur factorisation `A = U N Uᵀ` by Householder reduction to
//! Hessenberg form followed by Francis double-shift QR on the full matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Quasi-upper-triangular factorisation with 1×1 and 2×2 diagonal blocks.
/// Every 2×2 block holds a complex-conjugate pair in standard form
/// (equal diagonal entries, off-diagonal entries of opposite sign).
#[derive(Debug, Clone)]
pub struct SchurFactors {
    pub u: DMatrix<f64>,
    pub n: DMatrix<f64>,
    /// One eigenvalue per diagonal position; a 2×2 block stores `a + ib`
    /// then `a − ib` with `b > 0`.
    pub eigs: Vec<Complex64>,
    /// First index of every diagonal block, increasing.
    pub block_starts: Vec<usize>,
}

impl SchurFactors {
    pub fn dim(&self) -> usize {
        self.n.nrows()
    }

    /// `(start, size)` of every diagonal block.
    pub fn blocks(&self) -> Vec<(usize, usize)> {
        let m = self.dim();
        self.block_starts
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let end = self.block_starts.get(k + 1).copied().unwrap_or(m);
                (s, end - s)
            })
            .collect()
    }

    /// Smallest block-aligned cut that is at least `r`.
    pub fn aligned_cut(&self, r: usize) -> usize {
        let m = self.dim();
        if r >= m {
            return m;
        }
        if self.block_starts.binary_search(&r).is_ok() {
            r
        } else {
            r + 1
        }
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * &self.n * self.u.transpose()
    }

    /// Recompute `eigs` and `block_starts` from the stored quasi-triangle.
    pub(crate) fn refresh_structure(&mut self) {
        let m = self.dim();
        self.eigs.clear();
        self.block_starts.clear();
        let mut i = 0;
        while i < m {
            self.block_starts.push(i);
            if i + 1 < m && self.n[(i + 1, i)] != 0.0 {
                let (a, b, c) = (self.n[(i, i)], self.n[(i, i + 1)], self.n[(i + 1, i)]);
                let im = (b.abs().sqrt()) * (c.abs().sqrt());
                self.eigs.push(Complex64::new(a, im));
                self.eigs.push(Complex64::new(a, -im));
                i += 2;
            } else {
                self.eigs.push(Complex64::new(self.n[(i, i)], 0.0));
                i += 1;
            }
        }
    }
}

/// Dense row-major work matrix; the QR sweeps are row-oriented.
pub(crate) struct Work {
    pub m: usize,
    pub d: Vec<f64>,
}

impl Work {
    pub fn from_dmatrix(a: &DMatrix<f64>) -> Self {
        let m = a.nrows();
        let mut d = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                d[i * m + j] = a[(i, j)];
            }
        }
        Self { m, d }
    }

    pub fn identity(m: usize) -> Self {
        let mut d = vec![0.0; m * m];
        for i in 0..m {
            d[i * m + i] = 1.0;
        }
        Self { m, d }
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.m, self.m, &self.d)
    }

    #[inline(always)]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.m + j]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.d[i * self.m + j] = v;
    }

    /// Rows `i`, `k` ← `[c s; −s c]` applied to columns `from..`.
    pub fn rot_rows(&mut self, i: usize, k: usize, c: f64, s: f64, from: usize) {
        let m = self.m;
        for j in from..m {
            let x = self.d[i * m + j];
            let y = self.d[k * m + j];
            self.d[i * m + j] = c * x + s * y;
            self.d[k * m + j] = c * y - s * x;
        }
    }

    /// Columns `i`, `k` over rows `0..to` ← same rotation from the right.
    pub fn rot_cols(&mut self, i: usize, k: usize, c: f64, s: f64, to: usize) {
        let m = self.m;
        for r in 0..to {
            let x = self.d[r * m + i];
            let y = self.d[r * m + k];
            self.d[r * m + i] = c * x + s * y;
            self.d[r * m + k] = c * y - s * x;
        }
    }
}

/// Householder reduction to upper Hessenberg form, accumulating the
/// orthogonal factor. `h` is overwritten; `v` must start as the identity.
fn hessenberg(h: &mut Work, v: &mut Work) {
    let m = h.m;
    if m < 3 {
        return;
    }
    let mut ort = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    for k in 1..m - 1 {
        let scale: f64 = (k..m).map(|i| h.at(i, k - 1).abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in k..m {
            ort[i] = h.at(i, k - 1) / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[k] > 0.0 {
            g = -g;
        }
        hh -= ort[k] * g;
        ort[k] -= g;
        // Left: rows k.. of H ← (I − u uᵀ/hh) H, columns k−1.. .
        tmp[k - 1..m].iter_mut().for_each(|t| *t = 0.0);
        for i in k..m {
            let oi = ort[i];
            let row = &h.d[i * m..(i + 1) * m];
            for j in k - 1..m {
                tmp[j] += oi * row[j];
            }
        }
        for i in k..m {
            let f = ort[i] / hh;
            let row = &mut h.d[i * m..(i + 1) * m];
            for j in k - 1..m {
                row[j] -= f * tmp[j];
            }
        }
        // Right: columns k.. of H ← H (I − u uᵀ/hh), all rows.
        for i in 0..m {
            let row = &mut h.d[i * m..(i + 1) * m];
            let mut f = 0.0;
            for j in k..m {
                f += ort[j] * row[j];
            }
            f /= hh;
            for j in k..m {
                row[j] -= f * ort[j];
            }
        }
        h.set(k, k - 1, scale * g);
        for i in k + 1..m {
            h.set(i, k - 1, 0.0);
        }
        reflectors.push((k, ort[k..m].to_vec(), hh));
    }
    // V = Q₁ Q₂ … accumulated backwards; every Qₖ touches rows/cols k.. .
    for (k, u, hh) in reflectors.into_iter().rev() {
        tmp[k..m].iter_mut().for_each(|t| *t = 0.0);
        for i in k..m {
            let ui = u[i - k];
            let row = &v.d[i * m..(i + 1) * m];
            for j in k..m {
                tmp[j] += ui * row[j];
            }
        }
        for i in k..m {
            let f = u[i - k] / hh;
            let row = &mut v.d[i * m..(i + 1) * m];
            for j in k..m {
                row[j] -= f * tmp[j];
            }
        }
    }
}

/// LAPACK-style standardisation of the 2×2 block at `(k, k)`: returns the
/// rotation applied, with the block left either upper triangular (real
/// pair) or with equal diagonal and `b·c < 0` (complex pair).
pub(crate) fn standardize_block(h: &mut Work, z: &mut Work, k: usize) {
    let (mut a, mut b, mut c, mut d) = (h.at(k, k), h.at(k, k + 1), h.at(k + 1, k), h.at(k + 1, k + 1));
    let (cs, sn) = lanv2(&mut a, &mut b, &mut c, &mut d);
    let m = h.m;
    h.rot_rows(k, k + 1, cs, sn, k + 2);
    h.rot_cols(k, k + 1, cs, sn, k);
    z.rot_cols(k, k + 1, cs, sn, m);
    h.set(k, k, a);
    h.set(k, k + 1, b);
    h.set(k + 1, k, c);
    h.set(k + 1, k + 1, d);
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Schur factorisation of a real 2×2 matrix (the classical `dlanv2`).
/// Returns `(cs, sn)` with `[a b; c d] ← [cs sn; −sn cs] [a b; c d] [cs −sn; sn cs]`.
fn lanv2(a: &mut f64, b: &mut f64, c: &mut f64, d: &mut f64) -> (f64, f64) {
    let eps = f64::EPSILON;
    let (mut cs, mut sn);
    if *c == 0.0 {
        cs = 1.0;
        sn = 0.0;
    } else if *b == 0.0 {
        cs = 0.0;
        sn = 1.0;
        std::mem::swap(a, d);
        *b = -*c;
        *c = 0.0;
    } else if *a - *d == 0.0 && b.signum() != c.signum() {
        cs = 1.0;
        sn = 0.0;
    } else {
        let temp = *a - *d;
        let mut p = 0.5 * temp;
        let bcmax = b.abs().max(c.abs());
        let bcmis = b.abs().min(c.abs()) * b.signum() * c.signum();
        let scale = p.abs().max(bcmax);
        let mut z = p / scale * p + bcmax / scale * bcmis;
        if z >= 4.0 * eps {
            z = p + sign(scale.sqrt() * z.sqrt(), p);
            *a = *d + z;
            *d -= bcmax / z * bcmis;
            let tau = c.hypot(z);
            cs = z / tau;
            sn = *c / tau;
            *b -= *c;
            *c = 0.0;
        } else {
            let sigma = *b + *c;
            let tau = sigma.hypot(temp);
            cs = (0.5 * (1.0 + sigma.abs() / tau)).sqrt();
            sn = -(p / (tau * cs)) * sign(1.0, sigma);
            let aa = *a * cs + *b * sn;
            let bb = -*a * sn + *b * cs;
            let cc = *c * cs + *d * sn;
            let dd = -*c * sn + *d * cs;
            *a = aa * cs + cc * sn;
            *b = bb * cs + dd * sn;
            *c = -aa * sn + cc * cs;
            *d = -bb * sn + dd * cs;
            let temp = 0.5 * (*a + *d);
            *a = temp;
            *d = temp;
            if *c != 0.0 {
                if *b != 0.0 {
                    if b.signum() == c.signum() {
                        let sab = b.abs().sqrt();
                        let sac = c.abs().sqrt();
                        p = sign(sab * sac, *c);
                        let tau = 1.0 / (*b + *c).abs().sqrt();
                        *a = temp + p;
                        *d = temp - p;
                        *b -= *c;
                        *c = 0.0;
                        let cs1 = sab * tau;
                        let sn1 = sac * tau;
                        let t = cs * cs1 - sn * sn1;
                        sn = cs * sn1 + sn * cs1;
                        cs = t;
                    }
                } else {
                    *b = -*c;
                    *c = 0.0;
                    let t = cs;
                    cs = -sn;
                    sn = t;
                }
            }
        }
    }
    (cs, sn)
}

/// Francis double-shift QR on an upper Hessenberg matrix, applied to the
/// whole matrix so that the result is the full quasi-triangular factor.
fn francis(h: &mut Work, v: &mut Work) -> Result<()> {
    let nn = h.m;
    let eps = f64::EPSILON;
    let max_iter = 30 * nn.max(10);
    let mut exshift = 0.0;
    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h.at(i, j).abs();
        }
    }
    if norm == 0.0 {
        return Ok(());
    }
    let mut n = nn as isize - 1;
    let mut iter = 0usize;
    let mut total = 0usize;
    let (mut p, mut q, mut r, mut s, mut z);
    let (mut w, mut x, mut y);
    while n >= 0 {
        let nu = n as usize;
        let mut l = nu;
        while l > 0 {
            s = h.at(l - 1, l - 1).abs() + h.at(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if h.at(l, l - 1).abs() < eps * s {
                break;
            }
            l -= 1;
        }
        if l == nu {
            h.set(nu, nu, h.at(nu, nu) + exshift);
            if nu > 0 {
                h.set(nu, nu - 1, 0.0);
            }
            n -= 1;
            iter = 0;
        } else if l == nu - 1 {
            h.set(nu, nu, h.at(nu, nu) + exshift);
            h.set(nu - 1, nu - 1, h.at(nu - 1, nu - 1) + exshift);
            if nu >= 2 {
                h.set(nu - 1, nu - 2, 0.0);
            }
            standardize_block(h, v, nu - 1);
            n -= 2;
            iter = 0;
        } else {
            x = h.at(nu, nu);
            y = h.at(nu - 1, nu - 1);
            w = h.at(nu, nu - 1) * h.at(nu - 1, nu);
            if iter > 0 && iter.is_multiple_of(10) && !iter.is_multiple_of(20) {
                // Wilkinson's ad hoc shift.
                exshift += x;
                for i in 0..=nu {
                    h.set(i, i, h.at(i, i) - x);
                }
                s = h.at(nu, nu - 1).abs() + h.at(nu - 1, nu - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            if iter > 0 && iter.is_multiple_of(20) {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in 0..=nu {
                        h.set(i, i, h.at(i, i) - s);
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }
            iter += 1;
            total += 1;
            if total > max_iter {
                return Err(Error::SchurNoConvergence(format!(
                    "active block {l}..={nu} did not deflate after {total} sweeps"
                )));
            }
            // Look for two consecutive small subdiagonal elements.
            let mut mm = nu - 2;
            loop {
                z = h.at(mm, mm);
                r = x - z;
                s = y - z;
                p = (r * s - w) / h.at(mm + 1, mm) + h.at(mm, mm + 1);
                q = h.at(mm + 1, mm + 1) - z - r - s;
                r = h.at(mm + 2, mm + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if mm == l {
                    break;
                }
                if h.at(mm, mm - 1).abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (h.at(mm - 1, mm - 1).abs() + z.abs() + h.at(mm + 1, mm + 1).abs()))
                {
                    break;
                }
                mm -= 1;
            }
            for i in mm + 2..=nu {
                h.set(i, i - 2, 0.0);
                if i > mm + 2 {
                    h.set(i, i - 3, 0.0);
                }
            }
            let m = nn;
            for k in mm..nu {
                let notlast = k != nu - 1;
                if k != mm {
                    p = h.at(k, k - 1);
                    q = h.at(k + 1, k - 1);
                    r = if notlast { h.at(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s == 0.0 {
                    continue;
                }
                if k != mm {
                    h.set(k, k - 1, -s * x);
                } else if l != mm {
                    h.set(k, k - 1, -h.at(k, k - 1));
                }
                p += s;
                x = p / s;
                y = q / s;
                z = r / s;
                q /= p;
                r /= p;
                // Row modification.
                {
                    let (head, tail) = h.d.split_at_mut((k + 1) * m);
                    let rk = &mut head[k * m..];
                    let (rk1, rest) = tail.split_at_mut(m);
                    if notlast {
                        let rk2 = &mut rest[..m];
                        for j in k..m {
                            let pp = rk[j] + q * rk1[j] + r * rk2[j];
                            rk2[j] -= pp * z;
                            rk[j] -= pp * x;
                            rk1[j] -= pp * y;
                        }
                    } else {
                        for j in k..m {
                            let pp = rk[j] + q * rk1[j];
                            rk[j] -= pp * x;
                            rk1[j] -= pp * y;
                        }
                    }
                }
                // Column modification.
                let top = nu.min(k + 3);
                for i in 0..=top {
                    let row = &mut h.d[i * m..(i + 1) * m];
                    let mut pp = x * row[k] + y * row[k + 1];
                    if notlast {
                        pp += z * row[k + 2];
                        row[k + 2] -= pp * r;
                    }
                    row[k] -= pp;
                    row[k + 1] -= pp * q;
                }
                // Accumulate transformations.
                for i in 0..m {
                    let row = &mut v.d[i * m..(i + 1) * m];
                    let mut pp = x * row[k] + y * row[k + 1];
                    if notlast {
                        pp += z * row[k + 2];
                        row[k + 2] -= pp * r;
                    }
                    row[k] -= pp;
                    row[k + 1] -= pp * q;
                }
            }
        }
    }
    Ok(())
}

/// Real Schur form of a square matrix.
pub fn real_schur(a: &DMatrix<f64>) -> Result<SchurFactors> {
    let m = a.nrows();
    assert_eq!(m, a.ncols(), "real_schur needs a square matrix");
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::SchurNoConvergence("input has non-finite entries".into()));
    }
    let mut h = Work::from_dmatrix(a);
    let mut v = Work::identity(m);
    hessenberg(&mut h, &mut v);
    francis(&mut h, &mut v)?;
    // Clear everything below the block structure.
    for i in 0..m {
        for j in 0..i.saturating_sub(1) {
            h.set(i, j, 0.0);
        }
    }
    let mut f = SchurFactors {
        u: v.to_dmatrix(),
        n: h.to_dmatrix(),
        eigs: Vec::new(),
        block_starts: Vec::new(),
    };
    f.refresh_structure();
    Ok(f)
}
