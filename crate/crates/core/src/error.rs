use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on `{}`: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input text. `line` is 1-based and counts the header.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error in field `{field}`: {msg}")]
    Schema { field: String, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category name used in CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Schema { .. } => "schema",
            Error::Validation(_) => "validation",
            Error::Argument(_) => "argument",
            Error::Lookup(_) => "lookup",
            Error::Shape(_) => "shape",
            Error::Usage(_) => "usage",
            Error::Divergence(_) => "divergence",
            Error::Serde(_) => "serialization",
        }
    }

    /// Process exit code for the category. 0 and 2 are left to success and
    /// argument parsing failures respectively.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Parse { .. } | Error::Schema { .. } | Error::Serde(_) => 4,
            Error::Validation(_) | Error::Argument(_) | Error::Lookup(_) => 5,
            Error::Shape(_) | Error::Usage(_) => 6,
            Error::Divergence(_) => 7,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
