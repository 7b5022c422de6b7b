//! JSON checkpoints: a format tag, version, the model shape and every named
//! tensor with its shape and row-major data.

use serde::{Deserialize, Serialize};

use super::network::{ModelParams, ModelShape, NamedTensor};
use crate::error::{FairgeError, Result};
use crate::linalg::Matrix;

pub const CHECKPOINT_FORMAT: &str = "fairge-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 2],
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    shape: ModelShape,
    tensors: Vec<TensorRecord>,
}

pub fn checkpoint_to_json(params: &ModelParams) -> Result<String> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        shape: params.shape,
        tensors: params
            .tensors
            .iter()
            .map(|t| TensorRecord {
                name: t.name.clone(),
                shape: [t.value.rows(), t.value.cols()],
                data: t.value.data().to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

/// Parses a checkpoint and verifies every tensor against the layout implied
/// by the stored shape.
pub fn checkpoint_from_json(text: &str) -> Result<ModelParams> {
    let file: CheckpointFile = serde_json::from_str(text)?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(FairgeError::Checkpoint(format!("unknown format `{}`", file.format)));
    }
    if file.version != CHECKPOINT_VERSION {
        return Err(FairgeError::Checkpoint(format!("unsupported version {}", file.version)));
    }
    let mut tensors = Vec::with_capacity(file.tensors.len());
    for t in file.tensors {
        let [r, c] = t.shape;
        if r * c != t.data.len() {
            return Err(FairgeError::Checkpoint(format!(
                "tensor `{}` declares {r}x{c} but holds {} values",
                t.name,
                t.data.len()
            )));
        }
        tensors.push(NamedTensor {
            name: t.name,
            value: Matrix::from_vec(r, c, t.data),
        });
    }
    let params = ModelParams {
        shape: file.shape,
        tensors,
    };
    params.validate_layout()?;
    Ok(params)
}
