//! Stereo triangulation and reprojection-guided iterative refinement.

mod predictor;
mod refine;
mod triangulate;

pub use predictor::{GaussNewton, OraclePredictor, ResidualPredictor, DEFAULT_DAMPING};
pub use refine::{
    refine, refine_batch, write_trace, IterationRecord, PredictorKind, RefinementConfig, RefinementState, ViewErrors,
};
pub use triangulate::{reproject_all, triangulate, Reprojection, MAX_CONDITION};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("heatmap stack has {got} joints, expected {expected}")]
    JointCountMismatch { expected: usize, got: usize },
    #[error("invalid refinement config: {0}")]
    InvalidConfig(String),
}
