//! Minimal reverse-mode automatic differentiation over `f64` matrices.

mod gradcheck;
mod ops;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::grad_check;
pub use ops::{argmax_rows, cross_entropy, gumbel_softmax, matrix, Noise, GUMBEL_CLAMP};
pub use optim::{OptimizerState, UpdateRule};
pub use tape::{ElementwiseOp, SparseRows, Tape, Var, PROB_FLOOR};
pub use tensor::{Matrix, ParamId, ParamStore, Tensor};

