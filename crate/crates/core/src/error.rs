use std::io;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("degenerate kernel: expected a one-dimensional kernel, found dimension {dim}")]
    DegenerateKernel { dim: usize },

    #[error("matrix is not numerically singular (smallest/largest singular value = {ratio:e})")]
    NotSingular { ratio: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no admissible matrix found after {attempts} attempts")]
    Exhausted { attempts: usize },

    #[error("jump condition violated: |(A - S) nu| = {residual:e}")]
    JumpCondition { residual: f64 },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("field has no raster")]
    MissingRaster,

    #[error("nonzero mean in component {component}: {mean:e}")]
    NonzeroMean { component: usize, mean: f64 },

    #[error("block size {block} does not divide grid dimension {dim}")]
    Divisibility { block: usize, dim: usize },

    #[error("geometry out of bounds: {0}")]
    Geometry(String),

    #[error("matrix set is empty")]
    EmptySet,

    #[error("raster of {requested} bytes exceeds the memory cap of {cap} bytes")]
    MemoryCap { requested: u128, cap: u128 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by resource limits rather than invalid input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::MemoryCap { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
