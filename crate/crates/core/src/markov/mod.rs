//! Models, the text format, reachability-system extraction and reducible
//! chain preprocessing.

pub mod format;
pub mod graph;
pub mod model;
pub mod prune;
pub mod system;

pub use format::{parse_model, write_ctmc, write_ctmdp, write_model, Model};
pub use model::{Ctmc, Ctmdp, RateMatrix};
pub use prune::{prune_reducible, PreprocessReport};
pub use system::{
    build_reachability_system, build_switched_partition, check_assumption1, uniformize, Assumption1,
    ReachabilitySystem,
};
