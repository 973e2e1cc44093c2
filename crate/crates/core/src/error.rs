use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed ontology path {term:?}")]
    MalformedPath { term: String },

    #[error("duplicate term {term_id:?} in catalogue {catalogue} (era {era}) at row {row}")]
    DuplicateTerm {
        catalogue: String,
        era: String,
        term_id: String,
        row: u64,
    },

    #[error("{path}: row {row}: {reason}")]
    BadRow {
        path: PathBuf,
        row: u64,
        reason: String,
    },

    #[error("schema conflict in {file}: columns {first:?} and {second:?} both resolve to {canonical:?}")]
    SchemaConflict {
        file: String,
        canonical: String,
        first: String,
        second: String,
    },

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("year {0} outside [1900, 2100]")]
    YearOutOfRange(i64),

    #[error("invalid corpus plan: {0}")]
    InvalidPlan(String),

    #[error("unknown selection {name:?}; available: {}", available.join(", "))]
    UnknownSelection {
        name: String,
        available: Vec<String>,
    },

    #[error("unknown report {name:?}; available: {}", available.join(", "))]
    UnknownReport {
        name: String,
        available: Vec<String>,
    },

    #[error("report {0:?} has no plot form")]
    Unplottable(String),

    #[error("invalid report parameter: {0}")]
    InvalidParameter(String),

    #[error("corrupt store data in {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("store already exists at {0}")]
    StoreExists(PathBuf),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
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

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
