use thiserror::Error;

pub type Result<T> = std::result::Result<T, QncError>;

#[derive(Debug, Error)]
pub enum QncError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no connected deployment after {retries} attempts (graph too sparse to reach the gateway)")]
    DeploymentFailed { retries: usize },

    #[error("node {node} cannot reach the gateway")]
    Disconnected { node: usize },

    #[error("quantizer needs 2^{bits} levels; at most 2^30 are supported")]
    LevelOverflow { bits: u32 },

    #[error("inconsistent packet-to-row map: {0}")]
    InconsistentRowMap(String),

    #[error("exact enumeration limited to n <= {limit}, got n = {n}")]
    ProblemTooLarge { n: usize, limit: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
