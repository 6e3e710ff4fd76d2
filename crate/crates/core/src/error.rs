use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Io,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("scatterer at ({x:.4}, {y:.4}, {z:.4}) lies outside the imaging region")]
    ScattererOutsideRegion { x: f64, y: f64, z: f64 },

    #[error("coincident points: distance between scatterer/voxel and element is zero")]
    CoincidentPoints,

    #[error("delay {tau:.6e} s is outside the profile window [0, {window:.6e}] s")]
    OutOfWindow { tau: f64, window: f64 },

    #[error("point too close to the array plane for the subarray size (radicand {radicand:.3e})")]
    BetaDomain { radicand: f64 },

    #[error("singular local linear transform (det = {det:.3e})")]
    SingularTransform { det: f64 },

    #[error("coordinate inversion did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("inverted position ({x:.4}, {y:.4}, {z:.4}) lies outside the expanded region")]
    OutsideRegion { x: f64, y: f64, z: f64 },

    #[error("subimage grid has {masked} of {total} lattice points masked")]
    GridMostlyMasked { masked: usize, total: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("profile unmeasurable: {0}")]
    Unmeasurable(String),

    #[error("{path}: schema mismatch: {message}")]
    SchemaMismatch { path: PathBuf, message: String },

    #[error("{path}: payload truncated ({actual} of {expected} bytes)")]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("{path}: dimension mismatch: {message}")]
    DimensionMismatch { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidParameter(_)
            | Error::Config { .. }
            | Error::ScattererOutsideRegion { .. }
            | Error::GridMismatch(_) => ErrorClass::Config,
            Error::SchemaMismatch { .. }
            | Error::TruncatedPayload { .. }
            | Error::DimensionMismatch { .. }
            | Error::Io { .. }
            | Error::Json { .. } => ErrorClass::Io,
            Error::CoincidentPoints
            | Error::OutOfWindow { .. }
            | Error::BetaDomain { .. }
            | Error::SingularTransform { .. }
            | Error::NoConvergence { .. }
            | Error::OutsideRegion { .. }
            | Error::GridMostlyMasked { .. }
            | Error::Unmeasurable(_) => ErrorClass::Numeric,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
