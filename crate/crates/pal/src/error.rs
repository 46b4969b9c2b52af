use std::path::{Path, PathBuf};

/// Process exit code for bad usage or unreadable input.
pub const EXIT_INPUT: i32 = 2;
/// Process exit code for a numerical failure during training or evaluation.
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum PalError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed binary file; `offset` is the byte where decoding stopped.
    #[error("{}: byte {offset}: {message}", path.display())]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pal_core::Error),
}

impl PalError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn parse(path: &Path, message: impl ToString) -> Self {
        PalError::Parse {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use pal_core::Error as E;
        match self {
            PalError::Core(E::Diverged { .. } | E::Degenerate { .. } | E::OracleFailure(_)) => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        }
    }
}

pub type Result<T> = std::result::Result<T, PalError>;
