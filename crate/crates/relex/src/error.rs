use thiserror::Error;

#[derive(Debug, Error)]
pub enum RelexError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error at line {line}: {issues:?}")]
    Validation { line: usize, issues: Vec<String> },

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Grad(#[from] tapegrad::Error),
}

impl RelexError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        RelexError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code contract: 2 usage/config, 3 numeric, 4 artifact
    /// mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            RelexError::Numeric(_) => 3,
            RelexError::Grad(tapegrad::Error::Numeric(_)) => 3,
            RelexError::Checkpoint(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, RelexError>;
