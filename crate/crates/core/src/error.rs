use std::path::PathBuf;

use chrono::{NaiveDate, NaiveDateTime};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{file}: {reason}")]
    Schema { file: String, reason: String },

    #[error("topology: {0}")]
    Topology(String),

    #[error("time {0} is outside service hours")]
    OutsideServiceHours(NaiveDateTime),

    #[error("no track path between {0} and {1}")]
    Unreachable(String, String),

    #[error("unknown station {0}")]
    UnknownStation(String),

    #[error("donor pool has {found} undisrupted weekdays; at least 2 are required")]
    DonorPoolTooSmall { found: usize },

    #[error("no scheduled headway configured for line {0}")]
    MissingHeadway(String),

    #[error("predictor {predictor} has no usable data on {day}")]
    PredictorMissing { predictor: String, day: NaiveDate },

    #[error("weight solver did not converge: relative gap {gap:.3e} after {iterations} iterations")]
    NoConvergence { gap: f64, iterations: usize },

    #[error("estimation: {0}")]
    Estimation(String),

    #[error("simulation: {0}")]
    Simulation(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(file: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            file: file.into(),
            reason: reason.into(),
        }
    }
}
