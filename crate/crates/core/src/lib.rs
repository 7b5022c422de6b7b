//! Fairness-aware graph encoding for node classification when sensitive
//! attributes are partially missing.
//!
//! The pipeline zero-pads missing sensitive values, encodes graph structure
//! through the top-`m` adjacency eigenpairs, runs a small transformer over
//! the eigenvalue tokens and uses its output as a learned spectral filter
//! over node attributes. [`lab`] holds numerical checks of the multi-hop
//! alignment limits that motivate the design.

pub mod commands;
pub mod config;
pub mod data;
pub mod encoding;
pub mod error;
pub mod fairness;
pub mod graph;
pub mod lab;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod spectral;

pub use config::{RunConfig, TrainConfig};
pub use data::{
    apply_missing_mask, load_attributes, make_split, AttributeMatrix, Dataset, LabelVector,
    SensitiveColumn, Split,
};
pub use error::{FairgeError, Result};
pub use graph::{load_edge_list, Graph};
pub use pipeline::{run_experiment, Experiment};
pub use report::FairnessReport;
pub use spectral::{dense_eigendecomposition, spectral_gap, top_m_eigenpairs, SpectralTruncation};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for `seed`; distinct `stream`s give independent
/// sequences so masking, splitting and initialization never share draws.
pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
