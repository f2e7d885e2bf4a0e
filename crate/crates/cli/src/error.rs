use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error(transparent)]
    Core(#[from] dsa_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Short category printed in front of the message.
    pub fn category(&self) -> &'static str {
        use dsa_core::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Core(e) => match e {
                E::Config(_) => "config",
                E::Unsupported(_) => "unsupported",
                E::InvalidParameter(_) | E::Domain(_) | E::Degenerate(_) => "data",
                E::IntegrationFailure { .. } | E::Numerical(_) => "numerical",
                E::Initialization(_) | E::Diagnostics(_) => "sampler",
            },
        }
    }

    /// Process exit code; one per category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "parse" => 4,
            "unsupported" => 5,
            "data" => 6,
            "numerical" => 7,
            "sampler" => 8,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
