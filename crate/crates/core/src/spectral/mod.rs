//! Real Schur factorisation, block reordering, Perron vectors and
//! stability diagnostics.

pub mod perron;
pub mod reorder;
pub mod schur;
#[cfg(test)]
pub(crate) mod testing;

pub use perron::{perron_generator, perron_left_eigen, stability_margin, PerronData};
pub use reorder::{
    dominant_order, modal_scores, reorder_by_scores, reorder_dominant, reorder_prefix, score_order, swap_blocks,
    BlockOrderer,
};
pub use schur::{real_schur, SchurFactors};
