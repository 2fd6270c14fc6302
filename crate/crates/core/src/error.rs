use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid ring parameters: {0}")]
    InvalidParams(String),

    #[error("ring elements belong to different parameter sets")]
    ParamMismatch,

    #[error("smudging bound {bound} aliases modulo q (must be < q/2)")]
    SmudgingTooLarge { bound: u64 },

    #[error("plaintext value {value} at index {index} outside [-p/2, p/2)")]
    PlaintextOutOfRange { index: usize, value: i64 },

    #[error("expected {expected} chunks for dimension {dim}, got {got}")]
    ChunkCount { expected: usize, got: usize, dim: usize },

    #[error("ciphertext chunk index mismatch: {0} vs {1}")]
    ChunkMismatch(u32, u32),

    #[error("parameter validation failed: {0}")]
    Validation(String),

    #[error("evaluation point {0} is zero or repeated")]
    BadEvalPoint(u64),

    #[error("need {needed} shares, got {got}")]
    ShareCount { needed: usize, got: usize },

    #[error("threshold k={k} invalid for N={n}")]
    Threshold { k: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("setup aborted: {0}")]
    SetupAborted(String),

    #[error("round {round} aborted: {reason}")]
    RoundAborted { round: u32, reason: String },

    #[error("protocol state error: {0}")]
    State(String),

    #[error("client {0} is not selected as a decryptor")]
    NotSelected(u16),

    #[error("malformed message: {0}")]
    Decode(String),

    #[error("secure channel authentication failed")]
    Authentication,

    #[error("unknown recipient key id")]
    UnknownKey,

    #[error("capacity violation: {0}")]
    Capacity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
