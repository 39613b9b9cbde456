use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column}: cannot parse {cell:?} as a number")]
    NonNumeric {
        row: usize,
        column: usize,
        cell: String,
    },

    #[error("row {row}, column {column}: non-finite value")]
    NonFinite { row: usize, column: usize },

    #[error("n must exceed d (got n = {n}, d = {d})")]
    TooFewObservations { n: usize, d: usize },

    #[error("input contains no observations")]
    Empty,

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("singular covariance: smallest eigenvalue {smallest:e} <= threshold {threshold:e}")]
    SingularCovariance { smallest: f64, threshold: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("quadrature supports d <= 4 only (got d = {0}); use the closed form instead")]
    UnsupportedDimension(usize),

    #[error("cannot parse alternative {label:?}: {reason}\n{grammar}")]
    AlternativeParse {
        label: String,
        reason: String,
        grammar: &'static str,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input or the call.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::SingularCovariance { .. } | Error::Numerical(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
