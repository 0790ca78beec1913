use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum DiffmapError {
    #[error("point {index} has zero degree after sparsification")]
    IsolatedPoint { index: usize },

    #[error("nonpositive degree {degree} at row {index}")]
    DegenerateDegree { index: usize, degree: f64 },

    #[error("all points coincide; kernel scale is zero")]
    ZeroScale,

    #[error("graph is effectively disconnected (lambda_1 = {lambda1})")]
    ReducibleGraph { lambda1: f64 },

    #[error("eigensolver failure: {0}")]
    Solver(String),

    #[error("dimension out of range: {0}")]
    Dimension(String),

    #[error("truncation ratio undefined: lambda_{index} = {value} <= 0")]
    UndefinedRatio { index: usize, value: f64 },

    #[error("need at least 3 eigenvalues for gap detection, got {0}")]
    InsufficientSpectrum(usize),

    #[error("fewer than {k} distinct rows; cannot form {k} clusters")]
    DegenerateCluster { k: usize },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("time step too large: dt * max|grad(2U)| = {0} must stay below 0.5")]
    StepSize(f64),

    #[error("degenerate dataset geometry: {0}")]
    Geometry(String),

    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("argument out of range: {0}")]
    Range(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DiffmapError>;
