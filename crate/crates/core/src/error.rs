use thiserror::Error;

/// Failure modes shared by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ring: {0}")]
    InvalidRing(String),

    #[error("invalid body: {0}")]
    InvalidBody(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("degenerate grid: fluid node {node:?} has every arm shorter than {theta_min}")]
    DegenerateGrid { node: [i64; 2], theta_min: f64 },

    #[error("linear solve did not reach tolerance {tol:e} within {iterations} sweeps at step {step} (residual {residual:e})")]
    LinearSolveFailure {
        step: usize,
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("query outside the admissible region: x = {x:?}, t = {t}")]
    OutOfDomain { x: [f64; 2], t: f64 },

    #[error("level {level} is empty at t = {t}")]
    EmptyLevel { level: f64, t: f64 },

    #[error("only {found} admissible samples found, {required} required")]
    InsufficientSamples { found: usize, required: usize },

    #[error("space-time gradient {norm:e} below threshold {threshold:e}")]
    DegenerateGradient { norm: f64, threshold: f64 },

    #[error("incompatible runs: {0}")]
    IncompatibleRuns(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed configuration: {0}")]
    Config(String),

    #[error("malformed snapshot dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn out_of_domain(x: &crate::geometry::Point, t: f64) -> Self {
        Error::OutOfDomain { x: [x[0], x[1]], t }
    }

    /// Short machine-readable tag, used in failure reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidRing(_) => "InvalidRing",
            Error::InvalidBody(_) => "InvalidBody",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::DegenerateGrid { .. } => "DegenerateGrid",
            Error::LinearSolveFailure { .. } => "LinearSolveFailure",
            Error::OutOfDomain { .. } => "OutOfDomain",
            Error::EmptyLevel { .. } => "EmptyLevel",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::DegenerateGradient { .. } => "DegenerateGradient",
            Error::IncompatibleRuns(_) => "IncompatibleRuns",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Config(_) => "Config",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}
