use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("restricted normal matrix is singular (pivot ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("active-set loop exceeded {0} iterations")]
    MaxIterations(usize),

    #[error("no coordinate reaches the boundary in finite time")]
    NoFiniteHit,

    #[error("path algorithm exceeded its loop bound of {0}")]
    MaxLoops(u64),

    #[error("path invariant violated: {0}")]
    InvariantViolated(String),

    #[error("integration step fell below {0:e}")]
    StepUnderflow(f64),

    #[error("simulated loss increased by {increase:e} at t = {t}")]
    Diverged { t: f64, increase: f64 },

    #[error("integrator gave up after {0} steps")]
    TooManySteps(usize),

    #[error("arc-length parameter does not increase at sample {0}")]
    NonMonotone(usize),

    #[error("orbit exceeded arc length {0} without reaching a critical point")]
    Stalled(f64),

    #[error("invalid orbit launch: {0}")]
    InvalidLaunch(String),

    #[error("orbit terminal differs from saddle {index} by {distance:e}")]
    SaddleMismatch { index: usize, distance: f64 },

    #[error("equicorrelated submatrix is rank deficient")]
    Degenerate,

    #[error("KKT residual {residual:e} exceeds tolerance at lambda = {lambda}")]
    KktViolation { lambda: f64, residual: f64 },

    #[error("{count} subsets exceed the exact-enumeration guard of {limit}")]
    TooManySubsets { count: f64, limit: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("failed to read {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
