//! Minimal reverse-mode differentiation over 2-D arrays.
//!
//! A [`Graph`] records each operation as it runs; [`Graph::backward`] then
//! walks the record once in reverse. Only the primitives the decoder needs
//! exist. The engine is generic over `f32` (training, evaluation) and `f64`
//! (finite-difference gradient checks).

mod graph;
mod optim;

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

use thiserror::Error;

pub use graph::{attention_probs, GegluParams, Gradients, Graph, Var, LAYER_NORM_EPS};
pub use optim::{cosine_lr, Adam, AdamConfig, LrSchedule, LR_END, LR_START};

/// Floating-point element type of the engine.
pub trait Real:
    num_traits::Float
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + Debug
    + Default
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + std::iter::Sum
    + 'static
{
    fn erf(self) -> Self;
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn erf(self) -> Self {
        libm::erff(self)
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Real for f64 {
    fn erf(self) -> Self {
        libm::erf(self)
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("{op}: shape mismatch, expected {expected:?}, found {found:?}")]
    Shape {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{op}: {message}")]
    Invalid { op: &'static str, message: String },
    #[error("attention mask row {0} denies every position")]
    FullyDeniedRow(usize),
    #[error("target value {0} is not a bit")]
    BadTarget(f64),
    #[error("non-finite gradient for parameter '{name}' at step {step}")]
    NonFiniteGradient { name: String, step: u64 },
    #[error("step {step} outside schedule of {total} steps")]
    StepOutOfRange { step: u64, total: u64 },
}
