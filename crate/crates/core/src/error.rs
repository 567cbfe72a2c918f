use std::path::PathBuf;

use num_complex::Complex64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("z = {z} is a pole of the system (zI - A is singular)")]
    Pole { z: Complex64 },

    #[error("transformation matrix is numerically singular (condition number {condition:e} exceeds {cap:e})")]
    SingularTransform { condition: f64, cap: f64 },

    #[error("conditional covariance is singular in {0}")]
    SingularCovariance(&'static str),

    #[error("at least {required} environments are required, got {actual}")]
    TooFewEnvironments { required: usize, actual: usize },

    #[error("system is unstable (spectral radius {spectral_radius})")]
    Unstable { spectral_radius: f64 },

    #[error("decoder is degenerate: |det| = {det_abs:e}")]
    DegenerateDecoder { det_abs: f64 },

    #[error("optimization diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("Markov horizon {horizon} too short for T1 = {t1}, T2 = {t2}")]
    HorizonTooShort { horizon: usize, t1: usize, t2: usize },

    #[error("Hankel matrix rank is below {requested}: sigma_{requested} / sigma_1 = {ratio:e}")]
    RankDeficient { requested: usize, ratio: f64 },

    #[error("correlation undefined: component {component} of {which} is constant")]
    UndefinedCorrelation {
        which: &'static str,
        component: usize,
    },

    #[error("eigenvalue computation did not converge")]
    NoConvergence,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed dataset: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
