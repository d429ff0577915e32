//! Dense `f64` tensors with reverse-mode differentiation and Adam.

mod adam;
pub mod checkpoint;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{CheckpointError, TensorArchive};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("non-finite value produced by {op}")]
    NonFiniteValue { op: &'static str },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("tensors of rank {0} are not supported")]
    Rank(usize),
    #[error("data length {actual} does not match shape product {expected}")]
    DataLength { expected: usize, actual: usize },
    #[error("row index {index} out of range for {len} rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{0} of an empty input")]
    Empty(&'static str),
}
