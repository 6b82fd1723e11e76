use std::path::{Path, PathBuf};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_GATE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] cfgnn_core::Error),

    /// A file that parsed but does not hold what the command needs.
    #[error("{}: {msg}", path.display())]
    Invalid { path: PathBuf, msg: String },

    #[error("test accuracy {test_acc:.4} is below the {gate} gate (pass --no-gate to continue)")]
    Gate { test_acc: f64, gate: f64 },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Gate { .. } => EXIT_GATE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Usage(_) | CliError::Core(_) | CliError::Invalid { .. } => EXIT_USAGE,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn invalid(path: &Path, msg: impl ToString) -> Self {
        CliError::Invalid { path: path.to_path_buf(), msg: msg.to_string() }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
