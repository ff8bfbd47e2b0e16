use std::path::PathBuf;

use dprecourse_core::{BudgetAccountant, PrivacyReport};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dprecourse_core::Error),

    #[error("stage `{stage}` needs {} — run `{needs}` first", path.display())]
    StageDependency {
        stage: &'static str,
        needs: &'static str,
        path: PathBuf,
    },

    /// Budget refusal, with the ledger as it stood.
    #[error("{source}")]
    Budget {
        source: dprecourse_core::Error,
        ledger: PrivacyReport,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches the ledger to budget refusals; other errors pass through.
    pub fn budget(e: dprecourse_core::Error, acc: &BudgetAccountant) -> Self {
        match e {
            dprecourse_core::Error::BudgetExceeded { .. } => CliError::Budget {
                source: e,
                ledger: acc.report(),
            },
            other => CliError::Core(other),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) | CliError::Budget { source: e, .. } => e.kind(),
            CliError::StageDependency { .. } => "StageDependencyError",
            CliError::Config(_) => "ConfigError",
            CliError::Io { .. } => "IoError",
        }
    }

    /// Machine-readable form written to stderr on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Budget { ledger, .. } = self {
            v["ledger"] = serde_json::to_value(ledger).expect("ledger serializes");
        }
        v
    }
}
