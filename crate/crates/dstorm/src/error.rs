use std::path::PathBuf;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("checkpoint rejected: {0}")]
    Checkpoint(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

/// Process exit codes, one per failure category.
pub mod exit_code {
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const IO: i32 = 4;
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Self::Parse { path: path.into(), message: message.to_string() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Checkpoint(_) => exit_code::CONFIG,
            Self::Numeric(_) => exit_code::NUMERIC,
            Self::Io { .. } | Self::Parse { .. } => exit_code::IO,
        }
    }
}

impl From<dstorm_core::Error> for HarnessError {
    fn from(e: dstorm_core::Error) -> Self {
        use dstorm_core::Error as E;
        match e {
            E::Diverged { .. } | E::EigenNoConvergence { .. } => Self::Numeric(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}
