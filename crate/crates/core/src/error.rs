use thiserror::Error;

/// Errors raised by the solver and diagnostics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NlbError {
    #[error("grid size must be even and at least 4, got {0}")]
    InvalidGridSize(usize),

    #[error("field has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("operands live on different grids ({left} vs {right} nodes)")]
    GridMismatch { left: usize, right: usize },

    #[error("value {value} at node {index} is not strictly positive")]
    NotPositive { index: usize, value: f64 },

    #[error("fluctuation field must have zero mean, got {0:e}")]
    NonZeroMean(f64),

    #[error("kernel evaluated at its singularity z = {0}")]
    Singular(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("trajectory has too few records: need {needed}, have {have}")]
    TooFewRecords { needed: usize, have: usize },

    #[error("decay fit rejected: {0}")]
    DegenerateFit(String),

    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },
}

pub type Result<T, E = NlbError> = std::result::Result<T, E>;
