//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An evaluation vector with no dimensions has no defined distance.
    #[error("zero-dimensional evaluation")]
    ZeroDimensional,

    #[error("dimension count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dimension index {dimension} out of range 1..={j}")]
    DimensionOutOfRange { dimension: usize, j: usize },

    #[error("empty candidate list")]
    EmptyCandidates,

    /// Comparative evaluation needs at least two candidates per round when
    /// minimum-batch enforcement is on.
    #[error("comparative selection requires at least 2 candidates, got {got}")]
    BatchTooSmall { got: usize },

    #[error("winner references unknown source {0}")]
    UnknownSource(String),

    #[error("budget {budget} below minimal feasible batch {minimum}")]
    BudgetBelowMinimum { budget: usize, minimum: usize },

    #[error("tail bound undefined for start round {0}; smallest admissible start is 2")]
    TailBoundUndefined(usize),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("this analysis applies to conditioning mode only")]
    RequiresConditioningMode,

    #[error("round {round} needs {needed} agents, roster has {available}")]
    InsufficientAgents {
        round: usize,
        needed: usize,
        available: usize,
    },

    #[error("agent {agent} failed twice in round {round}: {reason}")]
    AgentFailed {
        round: usize,
        agent: String,
        reason: String,
    },

    #[error("trajectory parse failure: {reason}")]
    Parse { reason: String, raw: String },

    #[error(transparent)]
    Transport(#[from] crate::llm::TransportError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
