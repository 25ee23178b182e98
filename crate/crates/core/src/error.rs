use std::path::PathBuf;

use thiserror::Error;

use crate::lp::LpStatus;
use crate::system::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system: {}", format_violations(.0))]
    InvalidSystem(Vec<Violation>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("stage {stage} is outside the horizon 1..={horizon}")]
    StageOutOfRange { stage: i64, horizon: usize },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{context}: LP finished with status {status:?}{}", format_rows(.rows))]
    Lp {
        context: String,
        status: LpStatus,
        rows: Vec<String>,
    },

    #[error("LP backend failure: {0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Located {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wraps the error with a location such as `scenario 3, stage 12`.
    pub fn at(self, context: impl Into<String>) -> Self {
        Error::Located {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping location wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Located { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// 2 for configuration and data errors, 3 for LP failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Lp { .. } | Error::Solver(_) => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("[{}] {}", v.code.as_str(), v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

fn format_rows(rows: &[String]) -> String {
    if rows.is_empty() {
        String::new()
    } else {
        format!(" (constraints involved: {})", rows.join(", "))
    }
}
