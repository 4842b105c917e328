use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("rollback unavailable: pose stack is empty")]
    RollbackUnavailable,

    #[error("no path between ({:.2}, {:.2}) and ({:.2}, {:.2})", from.0, from.1, to.0, to.1)]
    Unreachable { from: (f64, f64), to: (f64, f64) },

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("provider error: {0}")]
    Provider(String),

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error("unsupported format `{found}` (expected `{expected}`)")]
    Format { found: String, expected: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }
}
