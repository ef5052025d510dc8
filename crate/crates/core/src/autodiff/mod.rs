//! Dense tensors with a reverse-mode tape.
//!
//! The engine is eager: each call on [`Tape`] evaluates its primitive and
//! records it. [`Tape::backward`] then sweeps the record in reverse. Values are
//! generic over [`Scalar`] so the same model code runs in `f32` for training
//! and in `f64` for gradient verification through [`finite_diff_check`].
//!
//! ```
//! use graphpde::autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::<f64>::new();
//! let x = tape.param(Tensor::row(vec![1.0, -2.0, 3.0])).unwrap();
//! let sq = tape.mul(x, x).unwrap();
//! let half = tape.scale(sq, 0.5).unwrap();
//! let loss = tape.sum(half).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[1.0, -2.0, 3.0]);
//! ```

mod check;
mod tape;
mod tensor;

pub use check::finite_diff_check;
pub use tape::{Gradients, Tape, Var, MASK_SENTINEL};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFiniteDetected { op: &'static str },
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NotScalarLoss { shape: Vec<usize> },
    #[error("index {index} out of range {len} in {op}")]
    IndexOutOfRange { op: &'static str, index: usize, len: usize },
}
