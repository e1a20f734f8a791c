use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid ring parameters: {0}")]
    InvalidRing(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("capacity exceeded: q = {q} is above the limit of {limit}")]
    Capacity { q: usize, limit: usize },

    #[error("no m <= {m_cap} with P_U(m) > 1/2 and P_chi(m) < 1/2")]
    NotFound { m_cap: usize },

    #[error("input exhausted: needed {needed} items, only {available} available")]
    InputExhausted { needed: usize, available: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
