//! Certified order reduction for time-bounded reachability in continuous-time
//! Markov chains and Markov decision processes.
//!
//! The reachability probabilities of a CTMC obey a stable linear system
//! `dX/dt = A X`. This crate projects that system onto a dominant invariant
//! subspace taken from a reordered real Schur form, solves the reduced
//! system in closed form, and bounds the output error with a diagonal
//! Lyapunov certificate `ε(t) = ξ‖Γ‖₂ e^{−κt}`. Decision processes are
//! handled as switched systems with a dwell-time error recursion.

pub mod bench;
pub mod error;
pub mod fixtures;
pub mod lyapunov;
pub mod markov;
pub mod models;
pub mod reduction;
pub mod spectral;
pub mod switched;
pub mod transient;
#[cfg(test)]
pub(crate) mod testing;

pub use error::{Error, Result};
