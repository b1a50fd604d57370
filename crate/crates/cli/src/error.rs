use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] krylovflow::Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(krylovflow::Error::Invariant(_) | krylovflow::Error::NotHermitian { .. }) => {
                EXIT_INVARIANT
            }
            _ => EXIT_USAGE,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_NUMERICAL => "numerical",
            EXIT_INVARIANT => "invariant",
            _ => match self {
                CliError::Io { .. } => "io",
                CliError::Config(_) | CliError::Csv { .. } => "config",
                _ => "usage",
            },
        }
    }

    /// One-line JSON error record for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Record {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .unwrap_or_else(|_| format!("{{\"error\":\"{}\"}}", self.kind()))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
