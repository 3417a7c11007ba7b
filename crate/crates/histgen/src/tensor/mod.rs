//! Minimal dense-tensor engine with tape-based reverse-mode differentiation.
//!
//! Tensors live on a [`Tape`]; every operation records enough context to
//! propagate gradients when [`Tape::backward`] replays the tape in reverse.
//! The graph is rebuilt per example, which keeps variable-length documents
//! simple at the cost of some allocation churn.
//!
//! All math runs at 64-bit precision by default. The `f32` feature switches
//! [`Real`] to 32 bits for speed; gradient-check tolerances are only
//! meaningful at 64-bit, so the verification suites are gated on the default
//! precision.

mod gradcheck;
mod rng;
mod serialize;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport};
pub use rng::Rng;
pub use serialize::{read_tensor, write_tensor};
pub use tape::{Tape, TensorId};

#[cfg(not(feature = "f32"))]
pub type Real = f64;
#[cfg(feature = "f32")]
pub type Real = f32;

/// Name of the active precision, recorded in checkpoints so that a payload
/// written in one mode is never silently reinterpreted in the other.
pub const PRECISION: &str = if cfg!(feature = "f32") { "f32" } else { "f64" };

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op} requires a non-empty input")]
    EmptyInput { op: &'static str },
    #[error("non-finite loss ({value}) encountered in {context}")]
    NonFinite { context: String, value: Real },
}
