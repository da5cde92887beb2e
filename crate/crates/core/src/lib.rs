//! Encoder-decoder transformer with a hormone emotion block: six attention
//! heads predict continuous hormone levels from the encoder states, and an
//! emotion embedding built from them modulates what the decoder attends to.
//!
//! See the crate's `examples/` directory for one runnable entry point per
//! capability, and `src/bin/endocrine.rs` for the CLI.

// `!(x >= 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod data;
pub mod eval;
pub mod infer;
pub mod losses;
pub mod model;
pub mod pipeline;
pub mod tensor;
pub mod train;
