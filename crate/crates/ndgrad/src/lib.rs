//! Tape-based reverse-mode automatic differentiation over dense f64 arrays.
//!
//! The engine is deliberately small: one [`Array`] type (row-major `Vec<f64>`
//! plus a shape), one recording [`Tape`], and the operation catalog a
//! sequence model over clinical event windows actually needs - matmul,
//! elementwise arithmetic and activations, 1-D convolutions, embedding
//! gather, concat/slice/reshape, reductions, top-k pooling, layer norm, and
//! weighted sigmoid cross-entropy. Anything else can be registered through
//! [`Tape::custom_op`] with a hand-derived backward.
//!
//! Everything runs sequentially in f64 with no hidden state, so a given
//! computation produces bit-identical values and gradients on every run.
//!
//! ```
//! use ndgrad::{Array, Tape};
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Array::vector(&[1.0, -2.0, 3.0]));
//! let y = tape.sum(tape.silu(x));
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(x).unwrap().len(), 3);
//! ```

mod array;
pub mod check;
mod params;
mod tape;

pub use array::{matmul, matmul_nt, matmul_tn, Array};
pub use check::grad_check;
pub use params::{expect_param, load_params, save_params, ParamMap};
pub use tape::{Grads, Tape, TapeValues, Var};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NdError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { op: &'static str, lhs: Vec<usize>, rhs: Vec<usize> },

    #[error("cannot build array of shape {shape:?} from {len} values")]
    BadConstruction { shape: Vec<usize>, len: usize },

    #[error("invalid slice {start}..{end} of array with shape {shape:?}")]
    BadSlice { shape: Vec<usize>, start: usize, end: usize },

    #[error("invalid axis {axis} for array with shape {shape:?}")]
    BadAxis { shape: Vec<usize>, axis: usize },

    #[error("gather index {index} out of range for table with {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },

    #[error("backward root must be a scalar, got shape {got:?}")]
    NonScalarRoot { got: Vec<usize> },

    #[error("checkpoint {path}: {detail}")]
    Checkpoint { path: String, detail: String },

    #[error("parameter {name} missing from checkpoint")]
    MissingParam { name: String },

    #[error("parameter {name}: expected shape {expected:?}, got {got:?}")]
    ParamShape { name: String, expected: Vec<usize>, got: Vec<usize> },
}

impl From<NdError> for std::io::Error {
    fn from(e: NdError) -> Self {
        std::io::Error::other(e.to_string())
    }
}
