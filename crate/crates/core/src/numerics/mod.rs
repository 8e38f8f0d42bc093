//! Dense linear algebra, reverse-mode differentiation, and gradient checking.

pub mod gradcheck;
pub mod matrix;
pub mod tape;

pub use gradcheck::{finite_diff_check, finite_diff_check_steps, relative_error, GradCheckReport};
pub use matrix::{l2_normalize_rows, matmul, mean_pool, softmax_rows, Matrix};
pub use tape::{Gradients, Tape, Var};
