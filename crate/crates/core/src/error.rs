use thiserror::Error;

use crate::environment::LinkId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The complex average of a pilot block collapsed toward the origin, so
    /// its argument carries no information. Callers treat this as an erasure.
    #[error("degenerate average: mean magnitude {magnitude:e} below floor")]
    DegenerateAverage { magnitude: f64 },

    #[error("mirror count {0} exceeds the supported maximum of 30")]
    Capacity(u32),

    #[error("invalid link {0}")]
    InvalidLink(LinkId),

    #[error("mirror state {0} is outside the state space")]
    StateOutOfRange(u32),

    #[error("mirror state {0} reused within a session")]
    StateReuse(u32),

    #[error("framing error: {0}")]
    Framing(String),

    #[error("insufficient key material: need {needed} shared phases, have {available}")]
    InsufficientKeyMaterial { needed: usize, available: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("inconsistent observations: {0}")]
    Inconsistent(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
