use thiserror::Error;

use crate::codes::CodeChoice;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot split {len} into {parts} equal partitions")]
    InfeasiblePartition { len: usize, parts: usize },

    #[error("{choice} is infeasible with {workers} workers: {reason}")]
    Infeasible {
        choice: CodeChoice,
        workers: usize,
        reason: String,
    },

    #[error("matrix shape mismatch: {0}")]
    Shape(String),

    #[error("not enough results to decode: have {have}, need {need}")]
    NotEnoughResults { have: usize, need: usize },

    #[error("decoding system is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no feasible code: {0}")]
    NoFeasibleCode(String),
}

pub type Result<T> = std::result::Result<T, Error>;
