use std::path::{Path, PathBuf};

use hyperinr_core::Error as CoreError;

/// Failures surfaced by the command-line front end.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Format { path: PathBuf, source: CoreError },

    #[error("fingerprint of {} does not match the config (rerun with --force to accept)", path.display())]
    Fingerprint { path: PathBuf },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    /// 1 for numeric or training failures, 2 for config and IO problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(
                CoreError::Numeric(_)
                | CoreError::Diverged { .. }
                | CoreError::NoConvergence { .. },
            ) => 1,
            _ => 2,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, source: CoreError) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            source,
        }
    }
}
