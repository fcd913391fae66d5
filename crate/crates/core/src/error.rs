use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The split between [`Error::is_numerical`] and everything else drives the
/// CLI exit code: input problems exit 1, numerical failures exit 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: {} invalid row(s):\n{}", .rows.len(), format_rows(.rows))]
    InvalidRows { path: PathBuf, rows: Vec<RowError> },

    #[error("zone `{zone}`: nonpositive field: {field}")]
    NonPositive { zone: String, field: String },

    #[error("zone `{zone}`: missing field: {field}")]
    MissingField { zone: String, field: String },

    #[error("source zone(s) absent from crosswalk: {}", .0.join(", "))]
    UnmappedZones(Vec<String>),

    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error("zone set mismatch: {0}")]
    ZoneMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("rank-deficient design: column `{column}` is linearly dependent on earlier columns")]
    RankDeficient { column: String },

    #[error("no significant predictors at alpha = {alpha}")]
    NoSignificantPredictors { alpha: f64 },

    #[error("non-finite objective at iteration {iteration}; iterate = {iterate:?}")]
    NonFiniteObjective { iteration: usize, iterate: Vec<f64> },

    #[error("{failed} of {total} bootstrap replicates failed to converge (more than 25%)")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("solver did not converge within {iterations} iterations (objective {objective})")]
    NotConverged { iterations: usize, objective: f64 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. }
                | Error::NonFiniteObjective { .. }
                | Error::BootstrapFailures { .. }
                | Error::NotConverged { .. }
                | Error::NoSignificantPredictors { .. }
        )
    }
}

/// A row-level problem in an input file. `line` is 1-based and counts the
/// header as line 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

fn format_rows(rows: &[RowError]) -> String {
    rows.iter()
        .map(|r| format!("  line {}: {}", r.line, r.message))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
