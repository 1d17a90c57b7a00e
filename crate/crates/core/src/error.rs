use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A configuration value violates its documented invariant.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Parameters, gradients or losses became NaN or infinite.
    #[error("non-finite value in {context} at environment step {step}")]
    Divergence { context: &'static str, step: u64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}
