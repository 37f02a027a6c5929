//! Shared generators for unit tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::markov::{build_reachability_system, Ctmc, RateMatrix, ReachabilitySystem};

/// Random generator block on `m` states, each with a random exit rate
/// into good, strongly connected through a ring.
pub fn random_system(m: usize, seed: u64) -> ReachabilitySystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trip = Vec::new();
    for i in 0..m {
        if m > 1 {
            trip.push((i, (i + 1) % m, rng.random_range(0.1..1.0)));
        }
        for j in 0..m {
            if i != j && rng.random_bool(0.3) {
                trip.push((i, j, rng.random_range(0.0..2.0)));
            }
        }
        if rng.random_bool(0.5) || i == 0 {
            trip.push((i, m, rng.random_range(0.05..1.0)));
        }
    }
    let r = RateMatrix::from_triplets(m + 1, trip).unwrap();
    build_reachability_system(&Ctmc::new(r, m, None, vec![]).unwrap()).unwrap()
}
