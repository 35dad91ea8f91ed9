//! Dense `f64` vectors and row-major matrices for hand-built recurrent networks.
//!
//! Every operation checks dimensions and fails with [`TensorError`] instead of
//! broadcasting. Values are plain owned buffers, so the types are `Send + Sync`
//! and every op is a pure function of its inputs.

mod error;
mod gradcheck;
mod matrix;
mod ops;
mod vector;

pub use error::TensorError;
pub use gradcheck::{central_difference, grad_check, GRAD_CHECK_FLOOR};
pub use matrix::Matrix;
pub use ops::{add, concat, hadamard, matvec, matvec_transposed, sigmoid, softmax, tanh_elem};
pub use vector::Vector;

pub type Result<T> = std::result::Result<T, TensorError>;
