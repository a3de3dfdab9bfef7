use std::path::PathBuf;

/// Errors raised by the numerical kernels and the scenario front end.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error("index {index} out of range (available: 1..={available})")]
    IndexOutOfRange { index: usize, available: usize },

    #[error("grid functions live on different grids ({left} vs {right} intervals)")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("weight parameter b = {0} outside the admissible range |b| < 0.2")]
    WeightOutOfRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("boundary slope |a| = {a:.3e} exceeds 1 at s = {s:.6}")]
    BoundaryBlowup { s: f64, a: f64 },

    #[error("interface radius became non-positive ({lambda:e}) at s = {s:.6}")]
    NonPositiveRadius { s: f64, lambda: f64 },

    #[error("relative mass drift {drift:.3e} exceeds tolerance {tolerance:.1e} at s = {s:.6}")]
    ConservationViolated { s: f64, drift: f64, tolerance: f64 },

    #[error("Gram matrix condition number {condition:.3e} exceeds 1e8")]
    SingularGram { condition: f64 },

    #[error("need at least {needed} consecutive states, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("reduced ODE reaches a pole at s = {pole:.6}")]
    PoleCrossing { pole: f64 },

    #[error("no trapped initial data: {0}")]
    NoTrappedData(String),

    #[error("run stopped before reaching the norm floor (final |v| = {final_norm:.3e})")]
    RunNotConverged { final_norm: f64 },

    #[error("|lambda - lambda_inf| spans only {decades:.2} decades (need 3)")]
    InsufficientDecay { decades: f64 },

    #[error("initial mode amplitude must be non-zero")]
    ZeroInitialMode,

    #[error("scenario failed: {0}")]
    Scenario(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line contract:
    /// 1 configuration, 2 verification, 3 dynamics.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::InvalidGrid(_)
            | Error::WeightOutOfRange(_)
            | Error::Io { .. }
            | Error::Json(_) => 1,
            Error::BoundaryBlowup { .. }
            | Error::NonPositiveRadius { .. }
            | Error::PoleCrossing { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
