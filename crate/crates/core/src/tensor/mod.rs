//! Minimal deterministic f64 tensor library with reverse-mode gradients.
//!
//! Every op records its parents and an explicit backward rule when gradient
//! tracking is enabled and at least one input requires a gradient. Calling
//! [`Tensor::backward`] on a scalar walks the recorded graph in reverse
//! topological order and accumulates gradients into leaf tensors.
//!
//! Broadcasting is limited to scalar-with-tensor; the few structured
//! broadcasts the model needs (`add_row`, `broadcast_over_seq`, suffix-batched
//! `matmul`) are separate ops with their own backward rules.

mod gradcheck;
mod init;
mod node;
mod ops;
mod rng;

pub use gradcheck::{finite_difference_check, GradCheckReport};
pub use init::{gaussian, orthogonal_init};
pub use node::{grad_enabled, no_grad, Tensor};
pub use rng::Rng;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}
