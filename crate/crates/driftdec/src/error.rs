use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("codebook error: {0}")]
    Codebook(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("end drift {drift} outside state space [{lo}, {hi}]")]
    DriftOutOfRange { drift: i64, lo: i64, hi: i64 },

    #[error("decoder underflow at index {0}: all-zero metric row (state space too small or inconsistent inputs)")]
    DecoderUnderflow(usize),

    #[error("no feasible execution plan: {0}")]
    PlanInfeasible(String),

    #[error("oracle guard exceeded: {0}")]
    OracleGuard(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
