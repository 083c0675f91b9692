use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain specification: {0}")]
    InvalidSpec(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("reference point ({0}, {1}) lies outside the reference triangle")]
    OutsideReference(f64, f64),

    #[error("index ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    Index {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("singular system: no usable pivot for row {row}")]
    Singular { row: usize },

    #[error("conflicting constraints on dof {dof}: {first} vs {second}")]
    ConstraintConflict { dof: usize, first: f64, second: f64 },

    #[error("incompatible space pairing: {0}")]
    Pairing(String),

    #[error("element kind mismatch: {0}")]
    KindMismatch(String),

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e} at step {step}")]
    Residual {
        step: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("blow-up at step {step} (t = {time})")]
    BlowUp { step: usize, time: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
