//! Crate-wide error type.
//!
//! Errors fall into three families that callers (notably the CLI) treat
//! differently:
//!
//! * configuration / input validation — the caller supplied something
//!   malformed (exit code 1 territory),
//! * cold start — a query needs data the stream has not produced yet;
//!   callers usually degrade gracefully instead of aborting,
//! * runtime — I/O and serialization failures (exit code 2 territory).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration document is internally inconsistent.
    #[error("invalid config: {0}")]
    Config(String),

    /// An input value violates an operation's contract.
    #[error("validation error: {0}")]
    Validation(String),

    /// A query arrived before the stream produced the data it needs.
    #[error("cold start: {0}")]
    ColdStart(String),

    /// A trace line could not be parsed; `line` is 1-based.
    #[error("trace line {line}: {reason}")]
    Trace { line: u64, reason: String },

    /// A snapshot document is malformed or belongs to a different config.
    #[error("snapshot error: {0}")]
    Snapshot(String),

    /// A pipeline stage failed while processing a specific timestep.
    #[error("{module} error at timestep {t}: {reason}")]
    Pipeline {
        module: &'static str,
        t: i64,
        reason: String,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the CLI should use for this error: 1 for validation-type
    /// problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Validation(_)
            | Error::ColdStart(_)
            | Error::Trace { .. }
            | Error::Snapshot(_) => 1,
            Error::Pipeline { .. } => 1,
            Error::Json(_) | Error::Io(_) => 2,
        }
    }
}
