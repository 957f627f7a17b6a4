use thiserror::Error;

use crate::hetero_tree::ConditionReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not a rotation matrix (max |R·Rᵀ − I| = {ortho:e}, det = {det})")]
    InvalidRotation { ortho: f64, det: f64 },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("matrix has no corresponding out-tree: {0}")]
    NotATree(ConditionReport),

    #[error("matrix cannot be completed: {0}")]
    NotCompletable(ConditionReport),

    #[error("translation reached an inconsistent state: {0}")]
    Internal(String),

    #[error("sensor {0} shows no joint dependency (all-zero Jacobian statistic)")]
    DegenerateSensor(String),

    #[error("training diverged for {sensor} at epoch {epoch}: non-finite loss")]
    Diverged { sensor: String, epoch: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps the error with the name of the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// The innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
