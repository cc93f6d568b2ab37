use std::path::PathBuf;

/// Errors surfaced by the harness, stores, CLI and service.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid or unresolvable configuration; reported before any run starts.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Core(#[from] realign_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{0}")]
    Empty(&'static str),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for everything
    /// that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Core(realign_core::Error::InvalidConfig { .. }) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
