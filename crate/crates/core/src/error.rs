use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice size: {0}")]
    InvalidSize(String),

    #[error("invalid color distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid color mask: {0}")]
    InvalidMask(String),

    #[error("ground set size mismatch: expected {expected}, got {actual}")]
    GroundSizeMismatch { expected: usize, actual: usize },

    #[error("ground set too large for exhaustive enumeration: {0}")]
    TooLarge(String),

    #[error("probability out of range: {0}")]
    ProbabilityOutOfRange(String),

    #[error("property direction mismatch: {0}")]
    DirectionMismatch(String),

    #[error("unknown boundary segment {0:?}")]
    UnknownSegment(String),

    #[error("invalid experiment: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
