//! Dense tensors, the handful of kernels the layers need, seeded randomness
//! and parameter initialization.

mod init;
mod ops;
mod rng;
mod tensor;

pub use init::{init_params, InitScheme};
pub use ops::{
    argmax_rows, hadamard, matmul, matmul_nt, matmul_tn, sigmoid, softmax_cross_entropy,
    Activation,
};
pub(crate) use ops::{add_row_bias, sum_rows};
pub use rng::SeededRng;
pub use tensor::{Scalar, Tensor};
