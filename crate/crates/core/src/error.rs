use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{file}:{line}: column `{column}`: {message}")]
    Malformed {
        file: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{file}:{line}: duplicate key `{key}`")]
    DuplicateKey { file: String, line: u64, key: String },
    #[error("{file}:{line}: `{key}` refers to an unknown {target}")]
    DanglingReference {
        file: String,
        line: u64,
        key: String,
        target: &'static str,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("no scored days for stay `{0}`")]
    NoScoredDays(String),
    #[error("unachievable target: {0}")]
    Unachievable(String),
    #[error("stratification impossible: {0}")]
    Stratification(String),
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error class, used by the CLI for exit codes and machine-readable output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Io,
    Parse,
    Config,
    Schema,
    Data,
    Metric,
    Artifact,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Io => "io",
            ErrorCategory::Parse => "parse",
            ErrorCategory::Config => "config",
            ErrorCategory::Schema => "schema",
            ErrorCategory::Data => "data",
            ErrorCategory::Metric => "metric",
            ErrorCategory::Artifact => "artifact",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Parse => 4,
            ErrorCategory::Schema => 5,
            ErrorCategory::Data => 6,
            ErrorCategory::Metric => 7,
            ErrorCategory::Artifact => 8,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Malformed { .. } | Error::DuplicateKey { .. } | Error::DanglingReference { .. } => {
                ErrorCategory::Parse
            }
            Error::Config(_) => ErrorCategory::Config,
            Error::Schema(_) => ErrorCategory::Schema,
            Error::DegenerateLabels(_) | Error::Stratification(_) => ErrorCategory::Data,
            Error::NoScoredDays(_) | Error::Unachievable(_) => ErrorCategory::Metric,
            Error::Artifact(_) => ErrorCategory::Artifact,
            Error::Context { source, .. } => source.category(),
            Error::Io { .. } => ErrorCategory::Io,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
