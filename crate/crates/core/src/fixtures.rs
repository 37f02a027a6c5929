//! Small reference models used across tests, the acceptance suite and the
//! CLI demos.

use crate::markov::{Ctmc, Ctmdp, RateMatrix};

fn ctmc(n: usize, good: usize, trip: &[(usize, usize, f64)]) -> Ctmc {
    Ctmc::new(RateMatrix::from_triplets(n, trip.iter().copied()).unwrap(), good, None, vec![]).unwrap()
}

/// Four transient states feeding an absorbing good state (index 4). With
/// `Λ31 = 1`, `Λ42 = 2` and no perturbation, `{0,1}` and `{2,3}` are exact
/// bisimulation classes.
pub fn four_state(lambda31: f64, lambda42: f64, eps13: f64, eps23: f64) -> Ctmc {
    let mut trip = vec![
        (0, 2, 2.0 + eps13),
        (0, 4, 2.0),
        (1, 2, 1.0 + eps23),
        (1, 3, 1.0),
        (1, 4, 2.0),
        (2, 1, 1.0),
        (3, 1, lambda42),
    ];
    if lambda31 > 0.0 {
        trip.push((2, 0, lambda31));
    }
    ctmc(5, 4, &trip)
}

pub fn example2_unperturbed() -> Ctmc {
    four_state(1.0, 2.0, 0.0, 0.0)
}

pub fn example2_perturbed() -> Ctmc {
    four_state(1.0, 2.0, -0.05, 0.05)
}

/// The two-decision CTMDP whose decisions differ only in state 0.
pub fn switching_example() -> Ctmdp {
    let shared = [
        (1, 0, 0.01),
        (1, 2, 0.5),
        (1, 3, 0.5),
        (1, 4, 2.0),
        (2, 1, 0.01),
        (2, 4, 1.0),
        (3, 1, 0.01),
        (3, 2, 0.05),
        (3, 4, 1.0),
    ];
    let d1 = shared.iter().copied().chain([(0, 1, 1.0)]);
    let d2 = shared.iter().copied().chain([(0, 2, 0.75), (0, 3, 0.75)]);
    Ctmdp::new(
        vec![
            RateMatrix::from_triplets(5, d1).unwrap(),
            RateMatrix::from_triplets(5, d2).unwrap(),
        ],
        4,
        None,
        vec![],
    )
    .unwrap()
}
