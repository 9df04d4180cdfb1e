//! Dense matrices and the reverse-mode engine the model is trained with.

pub mod gradcheck;
mod matrix;
mod tape;

pub use gradcheck::finite_diff_check;
pub use matrix::{gemm, gemm_into, DenseMatrix, SYMMETRY_TOLERANCE};
pub use tape::{sigmoid, GradientMap, ParamId, Tape, Var, BCE_EPSILON};
pub(crate) use tape::bce_value;
