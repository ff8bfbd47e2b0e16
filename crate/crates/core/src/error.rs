use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the recourse pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("unknown category `{value}` for feature `{feature}` at row {row}")]
    UnknownCategory {
        feature: String,
        value: String,
        row: usize,
    },

    #[error("degenerate bounds for feature `{0}`: min must be strictly below max")]
    DegenerateBounds(String),

    #[error("invalid one-hot encoding for feature `{feature}`: block sums to {sum}")]
    InvalidEncoding { feature: String, sum: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid privacy budget: {0}")]
    InvalidBudget(String),

    #[error("budget exceeded: spending ({requested_epsilon}, {requested_delta}) for `{label}` would exceed cap ({cap_epsilon}, {cap_delta})")]
    BudgetExceeded {
        label: String,
        requested_epsilon: f64,
        requested_delta: f64,
        cap_epsilon: f64,
        cap_delta: f64,
    },

    #[error("exponential mechanism called with no candidates")]
    EmptyCandidates,

    #[error("non-finite utility at index {0}")]
    InvalidUtility(usize),

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("regularization strength must be positive, got {0}")]
    InvalidRegularizer(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("too many clusters: K = {k} but only {n} records")]
    TooManyClusters { k: usize, n: usize },

    #[error("density model has no support points")]
    EmptySupport,

    #[error("every graph node is predicted favorable; no start node exists")]
    NoStartNode,

    #[error("graph has no candidate counterfactual nodes")]
    NoCandidates,

    #[error("no candidate counterfactual is reachable from start node {start}")]
    NoRecourse { start: usize },

    #[error("record is not a counterfactual: model does not predict the favorable label")]
    NotACounterfactual,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

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
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::Parse { .. } => "ParseError",
            Error::UnknownCategory { .. } => "UnknownCategory",
            Error::DegenerateBounds(_) => "DegenerateBounds",
            Error::InvalidEncoding { .. } => "InvalidEncoding",
            Error::InsufficientData(_) => "InsufficientData",
            Error::InvalidBudget(_) => "InvalidBudget",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::EmptyCandidates => "EmptyCandidates",
            Error::InvalidUtility(_) => "InvalidUtility",
            Error::DegenerateLabels => "DegenerateLabels",
            Error::InvalidRegularizer(_) => "InvalidRegularizer",
            Error::Dimension { .. } => "DimensionError",
            Error::TooManyClusters { .. } => "TooManyClusters",
            Error::EmptySupport => "EmptySupport",
            Error::NoStartNode => "NoStartNode",
            Error::NoCandidates => "NoCandidates",
            Error::NoRecourse { .. } => "NoRecourse",
            Error::NotACounterfactual => "NotACounterfactual",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::Io { .. } => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
