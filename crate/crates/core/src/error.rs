use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("empty region of interest: all {axis} removed by line threshold {threshold}")]
    EmptyRoi { axis: &'static str, threshold: f64 },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("undefined metric `{metric}`: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },

    /// `(sample, member)` pairs without a score.
    #[error("{} missing score(s): {}", .0.len(), preview_pairs(.0))]
    MissingScores(Vec<(String, String)>),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("{path}:{line}: {message}")]
    Ingestion {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn preview_pairs(pairs: &[(String, String)]) -> String {
    const SHOWN: usize = 8;
    let mut out: Vec<String> = pairs
        .iter()
        .take(SHOWN)
        .map(|(s, m)| format!("sample `{s}` / member `{m}`"))
        .collect();
    if pairs.len() > SHOWN {
        out.push(format!("and {} more", pairs.len() - SHOWN));
    }
    out.join(", ")
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
