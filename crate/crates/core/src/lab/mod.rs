//! Numerical checks of the multi-hop alignment limits, plus the synthetic
//! graphs they run on.

pub mod suite;
pub mod synthetic;
pub mod theorems;

pub use synthetic::{gen_graph, gen_synthetic, GraphKind, SyntheticSpec};
pub use theorems::{
    alignment_cosines, estimate_decay_rate, leading_pairs, limit_check, limit_check_vectors, limit_check_with,
    multiplicity_bound_check, sensitive_vectors, AlignmentSeries, Companion, DecayRate, MultiplicityBound,
    Oscillation, Variant,
};
