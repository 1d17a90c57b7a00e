use std::path::PathBuf;

/// Failures of the command-line pipeline, each tied to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Format(#[from] FormatError),
    #[error("training diverged ({context}) at step {step}; partial log written to {log}")]
    Divergence {
        context: &'static str,
        step: u64,
        log: PathBuf,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(rq_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Format(_) => 3,
            CliError::Divergence { .. } => 4,
            CliError::Io { .. } | CliError::Core(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<rq_core::Error> for CliError {
    fn from(e: rq_core::Error) -> Self {
        match e {
            rq_core::Error::Config { .. } | rq_core::Error::GridMismatch(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Core(other),
        }
    }
}

/// Malformed checkpoint or CSV input.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FormatError {
    #[error("{path}: not a checkpoint (bad magic bytes)")]
    BadMagic { path: String },
    #[error("{path}: checkpoint version {found} is not supported (this build reads version {supported})")]
    Version {
        path: String,
        found: u32,
        supported: u32,
    },
    #[error("{path}: truncated while reading {what}")]
    Truncated { path: String, what: &'static str },
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
