use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("table too large: {count} entries exceeds cap {cap}")]
    TableTooLarge { count: String, cap: u64 },

    #[error("enumeration infeasible: {count} hypotheses exceeds cap {cap}")]
    EnumerationInfeasible { count: String, cap: u64 },

    #[error("numeric range: {0}")]
    NumericRange(String),

    #[error("symbol out of range: {value} not in [-{bound}, {bound}]")]
    SymbolOutOfRange { value: i64, bound: i64 },

    #[error("closure map: {0}")]
    Closure(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("invalid dof point: {0}")]
    InvalidPoint(String),

    #[error("malformed channel file {path}: {msg}")]
    MalformedChannel { path: PathBuf, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid-config",
            Error::Dimension(_) => "dimension",
            Error::TableTooLarge { .. } => "table-too-large",
            Error::EnumerationInfeasible { .. } => "enumeration-infeasible",
            Error::NumericRange(_) => "numeric-range",
            Error::SymbolOutOfRange { .. } => "symbol-out-of-range",
            Error::Closure(_) => "closure",
            Error::Degenerate(_) => "degenerate",
            Error::InvalidPoint(_) => "invalid-point",
            Error::MalformedChannel { .. } => "malformed-channel",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
