use alloc::string::String;

use crate::lp::LpStatus;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid case: {0}")]
    Validation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid LP model: {0}")]
    InvalidModel(String),
    #[error("{stage} LP ended with status {status}")]
    Solver { stage: String, status: LpStatus },
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("no bilevel-feasible incumbent found: {0}")]
    NoIncumbent(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn solver(stage: impl Into<String>, status: LpStatus) -> Self {
        Error::Solver { stage: stage.into(), status }
    }
}
