use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", .path.display())]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {msg}", .path.display())]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Compute(#[from] fluxread_core::Error),

    #[error("writing {}: {source}", .path.display())]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Compute(_) | CliError::Output { .. } => 1,
            CliError::Config(_) | CliError::Input { .. } | CliError::Parse { .. } => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
