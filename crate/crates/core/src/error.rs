use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
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
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("schema mismatch in {path}: expected {expected}, found {found}")]
    Schema {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("no parseable rows in {0}")]
    NoRows(PathBuf),
    #[error("duplicate row for region {region:?} at {date} (line {line})")]
    DuplicateRow {
        region: String,
        date: String,
        line: u64,
    },
    #[error("series {region}/{feature} has {found} non-missing samples, need at least 2")]
    TooFewSamples {
        region: String,
        feature: String,
        found: usize,
    },
    #[error("regions without matching data: {0:?}")]
    RegionMismatch(Vec<String>),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("k-means needs {k} distinct points, found {distinct}")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error("too many distinct items for brute force: {found} > {max}")]
    TooManyItems { found: usize, max: usize },
    #[error("internal consistency error: {0}")]
    Consistency(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Name of the pipeline stage that produced this error, if known.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}
