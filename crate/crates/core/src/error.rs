use thiserror::Error;

/// Errors surfaced by the core library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("hidden state error: {0}")]
    HiddenState(&'static str),

    #[error("backward requires a recorded forward pass")]
    EmptyTape,

    #[error("parameter vector does not match this approximator's layout")]
    LayoutMismatch,

    #[error("invalid configuration: {}", violations.join("; "))]
    InvalidConfig { violations: Vec<String> },

    #[error("episode already terminal; reset before stepping")]
    EpisodeFinished,

    #[error("action {action} rejected: {reason}")]
    InvalidAction { action: usize, reason: String },

    #[error("undefined quantity: {0}")]
    Undefined(&'static str),

    #[error("degenerate baseline: sample variance of the control variate is zero")]
    DegenerateBaseline,

    #[error("need at least {needed} samples, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("non-finite gradient encountered; batch rejected")]
    NonFiniteGradient,

    #[error("training diverged at update {update}: {what} is non-finite")]
    Diverged { update: usize, what: &'static str },

    #[error("checkpoint i/o: {0}")]
    CheckpointIo(#[from] std::io::Error),

    #[error("checkpoint format: {0}")]
    CheckpointFormat(String),
}

impl CoreError {
    pub fn invalid_config(violations: Vec<String>) -> Self {
        CoreError::InvalidConfig { violations }
    }
}
