use std::path::PathBuf;

use thiserror::Error;

/// Failure of a subcommand. Every variant maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invariant(String),
    #[error("{0}")]
    Diverged(String),
    #[error("sweep has {runs} runs, above the cap of {cap}")]
    Cap { runs: usize, cap: usize },
    #[error("{breaches} instance(s) exceed the oracle gap tolerance (max gap {max_gap:e})")]
    OracleGap { breaches: usize, max_gap: f64 },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Parse(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Diverged(_) => 4,
            CliError::Cap { .. } => 5,
            CliError::OracleGap { .. } => 6,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<camegrad::Error> for CliError {
    fn from(e: camegrad::Error) -> Self {
        match e {
            camegrad::Error::Parse { .. } => CliError::Parse(e.to_string()),
            other => CliError::Invariant(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
