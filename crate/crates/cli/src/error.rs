use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Core(#[from] tweezer_readout::Error),
}

impl CliError {
    /// 0 ok, 1 other failure, 2 usage or config, 3 geometry, 4 grid detection, 5 threshold.
    pub fn exit_code(&self) -> u8 {
        use tweezer_readout::Error as E;
        match self {
            CliError::Usage(_) | CliError::Parse { .. } | CliError::Io { .. } => 2,
            CliError::Core(e) => match e {
                E::InvalidInput(_) | E::Format { .. } | E::Json(_) | E::Io(_) => 2,
                E::WindowOutOfBounds { .. } | E::IndexOutOfRange { .. } => 3,
                E::GridDetectFailed { .. } => 4,
                E::NotBimodal { .. } => 5,
                _ => 1,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
