use thiserror::Error;

use crate::alpha::AlphaError;
use crate::expr::{EvalError, ParseError};
use crate::region::RegionError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("evaluation failed at {point:?}: {source}")]
    EvalAt { point: Vec<f64>, source: EvalError },
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error("model error: {0}")]
    Model(String),
    #[error("line {line}: {message}")]
    ModelFile { line: usize, message: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn eval_at<T: crate::Scalar>(x: &[T], source: EvalError) -> Self {
        Error::EvalAt { point: x.iter().map(|v| v.to_f64_lossy()).collect(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
