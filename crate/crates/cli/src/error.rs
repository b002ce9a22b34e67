use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{0}")]
    Compute(#[from] idshield::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }

    pub fn data(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Self::Data {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for bad invocations and mechanism specs, 2 for bad data.
    pub fn exit_code(&self) -> u8 {
        use idshield::Error as E;
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Compute(E::InvalidSpec(_) | E::InvalidParameter(_)) => EXIT_USAGE,
            _ => EXIT_DATA,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
