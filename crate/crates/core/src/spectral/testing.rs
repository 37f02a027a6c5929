use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::SchurFactors;

pub fn random_matrix(m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0))
}

/// Descending by real part, then by imaginary part.
pub fn sorted_eigs(e: &[Complex64]) -> Vec<Complex64> {
    let mut v = e.to_vec();
    v.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap()));
    v
}

pub fn assert_schur_invariants(a: &DMatrix<f64>, f: &SchurFactors) {
    let m = a.nrows();
    let orth = (f.u.transpose() * &f.u - DMatrix::<f64>::identity(m, m)).abs().max();
    assert!(orth <= 1e-10, "orthogonality {orth:e}");
    let scale = a.abs().max().max(1.0);
    let rec = (a - f.reconstruct()).abs().max();
    assert!(rec <= 1e-8 * scale, "reconstruction {rec:e}");
    let mut starts = Vec::new();
    let mut i = 0;
    while i < m {
        starts.push(i);
        for r in i + 2..m {
            assert_eq!(f.n[(r, i)], 0.0);
        }
        if i + 1 < m && f.n[(i + 1, i)] != 0.0 {
            let (a11, a12, a21, a22) = (f.n[(i, i)], f.n[(i, i + 1)], f.n[(i + 1, i)], f.n[(i + 1, i + 1)]);
            assert_eq!(a11, a22, "2x2 block not standardised");
            assert!(a12 * a21 < 0.0, "2x2 block holds a real pair");
            assert!(i + 2 >= m || f.n[(i + 2, i + 1)] == 0.0);
            i += 2;
        } else {
            i += 1;
        }
    }
    assert_eq!(starts, f.block_starts);
    assert_eq!(f.eigs.len(), m);
}
