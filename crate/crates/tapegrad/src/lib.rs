//! Reverse-mode automatic differentiation over dense f64 tensors.
//!
//! Everything runs through a per-forward-pass [`Tape`]: operations execute
//! eagerly and append one node each, `backward` sweeps the tape once in
//! reverse and accumulates gradients into the leaf [`Tensor`]s. There is no
//! broadcasting beyond a row vector against a matrix (`add_row`) and a
//! column vector against a matrix (`mul_col`); any other shape mismatch is
//! an error.

mod check;
mod error;
mod optim;
mod tape;
mod tensor;

pub use check::grad_check;
pub use error::Error;
pub use optim::Adam;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
