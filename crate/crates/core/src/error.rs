use std::path::PathBuf;

use thiserror::Error;

use crate::model::LinearModel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: feature indices must be strictly increasing ({previous} then {found})")]
    Format {
        line: usize,
        previous: usize,
        found: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("io error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("both classes are required, found {n_pos} positive and {n_neg} negative examples")]
    SingleClass { n_pos: usize, n_neg: usize },

    #[error("labels must be -1 or +1, found {0} (binarize the dataset first)")]
    NonBinaryLabel(i64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("scores contain ties; {0}")]
    Ties(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("diverged at step {step}: {reason}")]
    Divergence {
        step: u64,
        reason: String,
        last_finite: Box<LinearModel>,
    },

    #[error(
        "dataset has {n} examples, above the pairwise trainer cap of {cap}; use the univariate solvers instead"
    )]
    CapExceeded { n: usize, cap: usize },

    #[error("could not draw both classes after {attempts} attempts")]
    RetriesExhausted { attempts: usize },
}
