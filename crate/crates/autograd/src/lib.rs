//! Small reverse-mode autodiff engine over dense row-major tensors.
//!
//! Backward rules are recorded with the same differentiable ops as the
//! forward pass, so gradients can be differentiated again (`create_graph`).
//! Convolutions are lowered to `im2col` + GEMM. All numerics are generic over
//! [`Scalar`] (`f32` / `f64`).

pub mod kernels;
pub mod nn;
mod ops;
pub mod optim;
mod params;
mod scalar;
mod tensor;
mod var;

pub use kernels::Conv2dGeometry;
pub use params::{Bound, ParamSet};
pub use scalar::Scalar;
pub use tensor::{numel, ShapeError, Tensor};
pub use var::{grad, grad_enabled, grad_with_seed, no_grad, with_grad_mode, Var};

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type Var32 = Var<f32>;
pub type Var64 = Var<f64>;
