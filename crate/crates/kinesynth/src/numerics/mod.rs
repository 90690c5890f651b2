//! Dense tensor arithmetic, differentiable layer primitives, Adam, and the
//! shared model container format.

pub mod adam;
pub mod layers;
pub mod loss;
pub mod persist;
pub mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use layers::{Conv1d, Dense, Dropout, LeakyRelu, MaxPool1d, Padding, Relu, Sigmoid, Softmax, Upsample1d};
pub use loss::{binary_cross_entropy, sparse_categorical_cross_entropy};
pub use tensor::{matmul, matmul_nt, matmul_tn, Parameter, Tensor};
