use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("field `{field}`: {value} {unit} is not an exact multiple of {quantum} {unit}")]
    NonExact {
        field: &'static str,
        value: f64,
        quantum: f64,
        unit: &'static str,
    },
    #[error("field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("infeasible placement: {needed} occupied cells requested on a lane of {available} cells")]
    Infeasible { needed: i64, available: i64 },
    #[error("line {line}: {source}")]
    Located {
        line: usize,
        #[source]
        source: Box<ConfigError>,
    },
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// A rule produced a state that breaks a structural invariant. This always
/// indicates a bug in the update rules, never bad input.
#[derive(Debug, Error)]
#[error("invariant violated at t={time}: {message}")]
pub struct InvariantViolation {
    pub time: u32,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Invariant(#[from] InvariantViolation),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    ConfigFile {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
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
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: column {column}: {reason}")]
    Schema {
        path: PathBuf,
        column: String,
        reason: String,
    },
    #[error("output directory {0} already exists (use --force to overwrite)")]
    OutputExists(PathBuf),
    #[error("{failed} of {total} sweep points failed")]
    PointsFailed { failed: usize, total: usize },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
