use thiserror::Error;

/// Errors raised anywhere in the optimizer.
#[derive(Debug, Error)]
pub enum Error {
    // space
    #[error("search space needs at least two variables")]
    EmptySpace,
    #[error("continuous variable `{0}` has invalid bounds")]
    BadBounds(String),
    #[error("discrete variable `{0}` needs a cardinality of at least 2")]
    BadCardinality(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    // graphmold
    #[error("centered node set is empty")]
    EmptyCenter,
    #[error("centered node {node} is out of range for a graph with {n} nodes")]
    CenterOutOfRange { node: usize, n: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("graph is not connected")]
    NotConnected,
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("{n} nodes exceeds the enumeration limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    // bandit
    #[error("bandit weights must be positive and finite")]
    NonFiniteWeight,
    #[error("no graph selection snapshot is pending")]
    MissingSnapshot,
    #[error("reward {0} is outside [0, 1]")]
    RewardOutOfRange(f64),

    // neural
    #[error("encoder slot {slot} out of range ({slots} slots)")]
    SlotOutOfRange { slot: usize, slots: usize },
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("loss became non-finite ({0})")]
    NonFiniteLoss(f64),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    // gpbo
    #[error("Cholesky factorization failed after the full jitter ladder")]
    CholeskyFailure,
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    // bench / external objectives
    #[error("objective evaluation timed out")]
    Timeout,
    #[error("protocol error: {0}")]
    ProtocolError(String),
    #[error("objective process died: {0}")]
    ProcessDied(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),

    // engine
    #[error("invalid run configuration: {0}")]
    InvalidRunConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
