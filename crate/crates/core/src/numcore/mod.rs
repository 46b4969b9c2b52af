//! Dense row-major matrices and the reverse passes of every operation the
//! pipeline composes.
//!
//! There is no tape. Each differentiable forward function has a matching
//! `*_backward` that maps the upstream gradient of its output to gradients
//! of its inputs; callers chain them by hand in the order the forward ran.

mod gradcheck;
mod gradients;
mod matrix;
pub(crate) mod ops;

pub use gradcheck::{check_gradients, FD_STEP};
pub use gradients::{Gradients, ParamId};
pub use matrix::Matrix;
pub use ops::{
    cosine_rows, cosine_rows_backward, matmul_backward, mean_rows, mean_rows_backward,
    row_softmax, row_softmax_backward, GRAD_NORM_FLOOR,
};
