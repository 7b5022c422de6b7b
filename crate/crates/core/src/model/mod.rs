//! The learnable part of the pipeline: reverse-mode autodiff, the network,
//! training and checkpoints.

mod checkpoint;
mod network;
pub mod tape;
mod train;

pub use checkpoint::{checkpoint_from_json, checkpoint_to_json, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use network::{
    attention, forward, fuse_layer, loss_and_gradients, predict, spectral_filter, transformer_block, forward_on_tape, ForwardGraph, FuseWeights,
    ModelInputs, ModelParams, ModelShape, NamedTensor,
};
pub use train::{train, Adam, EpochRecord, TrainHistory, TrainOptions};

use crate::data::{AttributeMatrix, SensitiveColumn};
use crate::encoding::{propagate_k_hop, zero_pad};
use crate::error::Result;
use crate::graph::Graph;
use crate::linalg::Matrix;

/// Node input matrix `[X | A X / |l1| | ... | A^k X / |l1|^k]` where `X` is
/// the zero-padded attribute matrix (optionally without its sensitive
/// column). Dividing by powers of the leading eigenvalue magnitude keeps all
/// blocks on a comparable scale; it is skipped when that magnitude is zero.
pub fn node_inputs(
    graph: &Graph,
    attrs: &AttributeMatrix,
    sensitive: &SensitiveColumn,
    k_hops: usize,
    lambda1: f64,
    keep_sensitive: bool,
) -> Result<Matrix> {
    let padded = zero_pad(attrs, sensitive)?;
    let base = if keep_sensitive {
        padded.matrix
    } else {
        let cols: Vec<Vec<f64>> = (0..attrs.d())
            .filter(|&j| j != padded.sensitive_index)
            .map(|j| padded.matrix.column(j))
            .collect();
        if cols.is_empty() {
            Matrix::zeros(attrs.n(), 0)
        } else {
            Matrix::from_columns(&cols)
        }
    };
    let scale = if lambda1.abs() > 0.0 { 1.0 / lambda1.abs() } else { 1.0 };
    let mut out = base.clone();
    let mut hop = base;
    for _ in 0..k_hops {
        hop = propagate_k_hop(graph, &hop, 1, false)?.scale(scale);
        out = out.hcat(&hop);
    }
    Ok(out)
}
