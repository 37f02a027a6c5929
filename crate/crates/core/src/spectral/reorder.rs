//! Reordering of real Schur forms by adjacent block swaps, and modal
//! contribution scores used to choose which blocks lead.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::schur::{standardize_block, SchurFactors, Work};

/// Mutable Schur form that tracks the identity of every diagonal block
/// (its index in the factorisation it was created from) while blocks are
/// moved around.
pub struct BlockOrderer {
    n: Work,
    u: Work,
    /// `(original block index, size)` in current diagonal order.
    blocks: Vec<(usize, usize)>,
}

impl BlockOrderer {
    pub fn new(f: &SchurFactors) -> Self {
        Self {
            n: Work::from_dmatrix(&f.n),
            u: Work::from_dmatrix(&f.u),
            blocks: f.blocks().iter().enumerate().map(|(k, &(_, sz))| (k, sz)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n.m
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    /// Number of rows covered by the first `count` blocks.
    pub fn leading_dim(&self, count: usize) -> usize {
        self.blocks[..count].iter().map(|b| b.1).sum()
    }

    /// Move the block with original index `id` to block position `pos`
    /// (which must not be after its current position).
    pub fn move_to_front(&mut self, id: usize, pos: usize) -> Result<()> {
        let mut cur = self
            .blocks
            .iter()
            .position(|b| b.0 == id)
            .expect("unknown block id");
        assert!(pos <= cur, "blocks only move towards the front");
        while cur > pos {
            let j1 = self.leading_dim(cur - 1);
            let (n1, n2) = (self.blocks[cur - 1].1, self.blocks[cur].1);
            swap_adjacent(&mut self.n, &mut self.u, j1, n1, n2)?;
            self.blocks.swap(cur - 1, cur);
            cur -= 1;
        }
        Ok(())
    }

    /// First `r` columns of `U` and the leading `r×r` block of `N`.
    pub fn leading(&self, r: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.dim();
        let p = DMatrix::from_fn(m, r, |i, j| self.u.at(i, j));
        let a = DMatrix::from_fn(r, r, |i, j| self.n.at(i, j));
        (p, a)
    }

    pub fn u_column(&self, j: usize) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| self.u.at(i, j))
    }

    pub fn factors(&self) -> SchurFactors {
        let mut f = SchurFactors {
            u: self.u.to_dmatrix(),
            n: self.n.to_dmatrix(),
            eigs: Vec::new(),
            block_starts: Vec::new(),
        };
        f.refresh_structure();
        f
    }
}

fn lartg(f: f64, g: f64) -> (f64, f64) {
    if g == 0.0 {
        (1.0, 0.0)
    } else if f == 0.0 {
        (0.0, 1.0)
    } else {
        let r = f.hypot(g);
        (f / r, g / r)
    }
}

/// Solve `T11 X − X T22 = T12` for blocks of size at most two by the
/// Kronecker formulation with partial pivoting.
fn sylvester_small(t11: &DMatrix<f64>, t22: &DMatrix<f64>, t12: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (n1, n2) = (t11.nrows(), t22.nrows());
    let k = n1 * n2;
    let mut sys = DMatrix::<f64>::zeros(k, k);
    // Column-major vec: index(i, j) = i + j·n1.
    for j in 0..n2 {
        for i in 0..n1 {
            let row = i + j * n1;
            for p in 0..n1 {
                sys[(row, p + j * n1)] += t11[(i, p)];
            }
            for q in 0..n2 {
                sys[(row, i + q * n1)] -= t22[(q, j)];
            }
        }
    }
    let rhs = DVector::from_fn(k, |row, _| t12[(row % n1, row / n1)]);
    let x = sys.lu().solve(&rhs)?;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(DMatrix::from_fn(n1, n2, |i, j| x[i + j * n1]))
}

/// Swap the adjacent diagonal blocks of sizes `n1` (at `j1`) and `n2`.
fn swap_adjacent(n: &mut Work, u: &mut Work, j1: usize, n1: usize, n2: usize) -> Result<()> {
    let m = n.m;
    if n1 == 1 && n2 == 1 {
        let j2 = j1 + 1;
        let (t11, t22) = (n.at(j1, j1), n.at(j2, j2));
        let (cs, sn) = lartg(n.at(j1, j2), t22 - t11);
        n.rot_rows(j1, j2, cs, sn, j2 + 1);
        n.rot_cols(j1, j2, cs, sn, j1);
        n.set(j1, j1, t22);
        n.set(j2, j2, t11);
        u.rot_cols(j1, j2, cs, sn, m);
        return Ok(());
    }
    let nd = n1 + n2;
    let d = DMatrix::from_fn(nd, nd, |i, j| n.at(j1 + i, j1 + j));
    let dnorm = d.abs().max();
    let t11 = d.view((0, 0), (n1, n1)).into_owned();
    let t22 = d.view((n1, n1), (n2, n2)).into_owned();
    let t12 = d.view((0, n1), (n1, n2)).into_owned();
    let x = sylvester_small(&t11, &t22, &t12).ok_or_else(|| {
        Error::SchurNoConvergence(format!("block swap at {j1}: blocks share an eigenvalue"))
    })?;
    // Orthonormal basis whose first n2 columns span [−X; I].
    let mut basis = DMatrix::<f64>::zeros(nd, nd);
    for i in 0..n1 {
        for j in 0..n2 {
            basis[(i, j)] = -x[(i, j)];
        }
    }
    for j in 0..n2 {
        basis[(n1 + j, j)] = 1.0;
    }
    for j in n2..nd {
        basis[(j - n2, j)] = 1.0;
    }
    let q = basis.qr().q();
    let mut dn = q.transpose() * &d * &q;
    let sub = dn.view((n2, 0), (n1, n2)).abs().max();
    for i in n2..nd {
        for j in 0..n2 {
            dn[(i, j)] = 0.0;
        }
    }
    let resid = (&d - &q * &dn * q.transpose()).abs().max();
    let thresh = 1e3 * f64::EPSILON * dnorm.max(f64::MIN_POSITIVE);
    if sub > thresh || resid > thresh {
        return Err(Error::SchurNoConvergence(format!(
            "block swap at {j1} rejected: residual {:e}",
            sub.max(resid)
        )));
    }
    // Apply Q to the rest of N and to U.
    let rows: Vec<Vec<f64>> = (0..nd).map(|i| n.d[(j1 + i) * m..(j1 + i + 1) * m].to_vec()).collect();
    for i in 0..nd {
        for col in j1 + nd..m {
            let mut s = 0.0;
            for k in 0..nd {
                s += q[(k, i)] * rows[k][col];
            }
            n.set(j1 + i, col, s);
        }
    }
    for r in 0..j1 {
        let old: Vec<f64> = (0..nd).map(|k| n.at(r, j1 + k)).collect();
        for j in 0..nd {
            n.set(r, j1 + j, (0..nd).map(|k| old[k] * q[(k, j)]).sum());
        }
    }
    for r in 0..m {
        let old: Vec<f64> = (0..nd).map(|k| u.at(r, j1 + k)).collect();
        for j in 0..nd {
            u.set(r, j1 + j, (0..nd).map(|k| old[k] * q[(k, j)]).sum());
        }
    }
    for i in 0..nd {
        for j in 0..nd {
            n.set(j1 + i, j1 + j, dn[(i, j)]);
        }
    }
    // Restore standard form of the moved blocks.
    if n2 == 2 {
        standardize_block(n, u, j1);
        if n.at(j1 + 1, j1) == 0.0 {
            return Err(Error::SchurNoConvergence(format!("complex pair at {j1} split during swap")));
        }
    } else {
        n.set(j1 + 1, j1, 0.0);
    }
    if n1 == 2 {
        standardize_block(n, u, j1 + n2);
        if n.at(j1 + n2 + 1, j1 + n2) == 0.0 {
            return Err(Error::SchurNoConvergence(format!("complex pair at {} split during swap", j1 + n2)));
        }
    }
    Ok(())
}

/// Swap the diagonal block starting at `j1` with the block after it.
pub fn swap_blocks(f: &mut SchurFactors, j1: usize) -> Result<()> {
    let blocks = f.blocks();
    let k = blocks
        .iter()
        .position(|b| b.0 == j1)
        .expect("j1 must start a diagonal block");
    assert!(k + 1 < blocks.len(), "no block after j1");
    let mut n = Work::from_dmatrix(&f.n);
    let mut u = Work::from_dmatrix(&f.u);
    swap_adjacent(&mut n, &mut u, j1, blocks[k].1, blocks[k + 1].1)?;
    f.n = n.to_dmatrix();
    f.u = u.to_dmatrix();
    f.refresh_structure();
    Ok(())
}

/// Move the blocks listed in `order` (original block indices) to the front,
/// in that order, stopping once at least `r` leading rows are covered.
/// Returns the reordered factors and the covered size `r_eff`.
pub fn reorder_prefix(f: &SchurFactors, order: &[usize], r: usize) -> Result<(SchurFactors, usize)> {
    let mut o = BlockOrderer::new(f);
    let mut covered = 0;
    for (pos, &id) in order.iter().enumerate() {
        if covered >= r {
            break;
        }
        o.move_to_front(id, pos)?;
        covered += o.blocks()[pos].1;
    }
    Ok((o.factors(), covered))
}

/// Block indices sorted by decreasing real part (ties keep input order).
pub fn dominant_order(f: &SchurFactors) -> Vec<usize> {
    let blocks = f.blocks();
    let mut ids: Vec<usize> = (0..blocks.len()).collect();
    ids.sort_by(|&a, &b| f.eigs[blocks[b].0].re.total_cmp(&f.eigs[blocks[a].0].re));
    ids
}

/// Move the `r` eigenvalues of largest real part into the leading block.
/// When the cut would split a complex pair the pair is kept whole and
/// `r_eff = r + 1`.
pub fn reorder_dominant(f: &SchurFactors, r: usize) -> Result<(SchurFactors, usize)> {
    assert!(r >= 1 && r <= f.dim(), "1 <= r <= m");
    reorder_prefix(f, &dominant_order(f), r)
}

/// Reorder the whole form so that blocks appear by decreasing score.
pub fn reorder_by_scores(f: &SchurFactors, scores: &[f64]) -> Result<SchurFactors> {
    let order = score_order(f, scores);
    Ok(reorder_prefix(f, &order, f.dim())?.0)
}

/// Block order by decreasing score. Scores below `1e-10` of the largest
/// count as zero; those blocks follow, ordered by decreasing real part.
pub fn score_order(f: &SchurFactors, scores: &[f64]) -> Vec<usize> {
    let blocks = f.blocks();
    assert_eq!(scores.len(), blocks.len());
    let top = scores.iter().cloned().fold(0.0f64, f64::max);
    let floor = 1e-10 * top;
    let mut ids: Vec<usize> = (0..blocks.len()).collect();
    ids.sort_by(|&a, &b| {
        let (za, zb) = (scores[a] <= floor, scores[b] <= floor);
        za.cmp(&zb)
            .then_with(|| {
                if za {
                    f.eigs[blocks[b].0].re.total_cmp(&f.eigs[blocks[a].0].re)
                } else {
                    scores[b].total_cmp(&scores[a])
                }
            })
    });
    ids
}

/// Solve the 1×1 or 2×2 complex system `(B − λI) x = rhs`, nudging a
/// singular pivot up to `smin`.
fn solve_shifted(b: &[[f64; 2]; 2], size: usize, lambda: Complex64, rhs: [Complex64; 2], smin: f64) -> [Complex64; 2] {
    let guard = |z: Complex64| if z.norm() < smin { Complex64::new(smin, 0.0) } else { z };
    if size == 1 {
        let den = guard(Complex64::new(b[0][0], 0.0) - lambda);
        return [rhs[0] / den, Complex64::new(0.0, 0.0)];
    }
    let a11 = Complex64::new(b[0][0], 0.0) - lambda;
    let a12 = Complex64::new(b[0][1], 0.0);
    let a21 = Complex64::new(b[1][0], 0.0);
    let a22 = Complex64::new(b[1][1], 0.0) - lambda;
    let det = guard(a11 * a22 - a12 * a21);
    [(rhs[0] * a22 - a12 * rhs[1]) / det, (a11 * rhs[1] - a21 * rhs[0]) / det]
}

/// Size of the contribution of every diagonal block to `N y`, where `y`
/// is expanded in the eigenvectors of `N`: block `k` with eigenvalue `λ`
/// and modal component `c v` scores `|λ|·|c|·‖v‖₂` (doubled for a complex
/// pair). Dropping a block from the projection leaves roughly that much of
/// `β = A X₀` unmatched.
pub fn modal_scores(f: &SchurFactors, y: &DVector<f64>) -> Vec<f64> {
    let m = f.dim();
    let nmax = f.n.abs().max().max(f64::MIN_POSITIVE);
    let smin = (f64::EPSILON * nmax).max(f64::MIN_POSITIVE);
    let blocks = f.blocks();
    let nr = Work::from_dmatrix(&f.n);
    let nt = Work::from_dmatrix(&f.n.transpose());
    let zero = Complex64::new(0.0, 0.0);
    let block_of = |i: usize| -> [[f64; 2]; 2] {
        let mut b = [[0.0; 2]; 2];
        b[0][0] = nr.at(i, i);
        if i + 1 < m {
            b[0][1] = nr.at(i, i + 1);
            b[1][0] = nr.at(i + 1, i);
            b[1][1] = nr.at(i + 1, i + 1);
        }
        b
    };
    let mut v = vec![zero; m];
    let mut w = vec![zero; m];
    blocks
        .iter()
        .enumerate()
        .map(|(k, &(s, sz))| {
            let lambda = f.eigs[s];
            let end = s + sz;
            v[..end].iter_mut().for_each(|z| *z = zero);
            w[s..].iter_mut().for_each(|z| *z = zero);
            if sz == 1 {
                v[s] = Complex64::new(1.0, 0.0);
                w[s] = Complex64::new(1.0, 0.0);
            } else {
                let (b12, b21) = (nr.at(s, s + 1), nr.at(s + 1, s));
                v[s] = Complex64::new(b12, 0.0);
                v[s + 1] = Complex64::new(0.0, lambda.im);
                w[s] = Complex64::new(b21, 0.0);
                w[s + 1] = Complex64::new(0.0, lambda.im);
            }
            // Right eigenvector: back substitution over the blocks above.
            for &(bi, bsz) in blocks[..k].iter().rev() {
                let mut rhs = [zero; 2];
                for (t, r) in rhs.iter_mut().enumerate().take(bsz) {
                    let row = &nr.d[(bi + t) * m..(bi + t + 1) * m];
                    let mut acc = zero;
                    for j in bi + bsz..end {
                        acc += v[j] * row[j];
                    }
                    *r = -acc;
                }
                let x = solve_shifted(&block_of(bi), bsz, lambda, rhs, smin);
                v[bi..bi + bsz].copy_from_slice(&x[..bsz]);
            }
            // Left eigenvector: forward substitution over the blocks below,
            // using rows of Nᵀ.
            for &(bi, bsz) in &blocks[k + 1..] {
                let mut rhs = [zero; 2];
                for (t, r) in rhs.iter_mut().enumerate().take(bsz) {
                    let row = &nt.d[(bi + t) * m..(bi + t + 1) * m];
                    let mut acc = zero;
                    for j in s..bi {
                        acc += w[j] * row[j];
                    }
                    *r = -acc;
                }
                let mut bt = block_of(bi);
                if bsz == 2 {
                    let tmp = bt[0][1];
                    bt[0][1] = bt[1][0];
                    bt[1][0] = tmp;
                }
                let x = solve_shifted(&bt, bsz, lambda, rhs, smin);
                w[bi..bi + bsz].copy_from_slice(&x[..bsz]);
            }
            let wv: Complex64 = (s..end).map(|j| w[j] * v[j]).sum();
            let wy: Complex64 = (s..m).map(|j| w[j] * y[j]).sum();
            let c = if wv.norm() > 0.0 { wy / wv } else { zero };
            let vnorm = v[..end].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let pair = if sz == 2 { 2.0 } else { 1.0 };
            pair * lambda.norm() * c.norm() * vnorm
        })
        .collect()
}
