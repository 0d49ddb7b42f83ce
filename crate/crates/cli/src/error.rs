use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: not found ({hint})")]
    MissingInput { path: PathBuf, hint: String },

    #[error(transparent)]
    Core(#[from] downwash_core::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 0 success, 2 config, 3 I/O or malformed input, 4 divergence, 1 other.
    pub fn exit_code(&self) -> i32 {
        use downwash_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::MissingInput { .. } => 3,
            CliError::Core(E::Io { .. } | E::Format { .. }) => 3,
            CliError::Core(E::Diverged { .. }) => 4,
            CliError::Core(_) => 1,
        }
    }
}
