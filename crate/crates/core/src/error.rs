use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum FairgeError {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input")]
    EmptyInput,

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("node ids must be dense 0..n-1: {0}")]
    NonContiguousIds(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no node has a disclosed sensitive attribute")]
    NoPresentNodes,

    #[error("eigensolver did not converge after {iterations} restarts (residuals {residuals:?})")]
    NoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("dense eigendecomposition capped at n={cap}, got n={n}")]
    OracleCap { n: usize, cap: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dominant eigenvalue magnitude is repeated ({multiplicity}x); use the multiplicity bound check")]
    RepeatedDominant { multiplicity: usize },

    #[error("decay rate not estimable: {0}")]
    NotEstimable(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl FairgeError {
    /// Whether the failure is numerical (non-convergence or divergence)
    /// rather than a problem with the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            FairgeError::NoConvergence { .. } | FairgeError::Divergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, FairgeError>;
