//! Minimal reverse-mode differentiation over dense row-major tensors.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s; calling
//! [`Graph::backward`] on a scalar output writes gradients into the grad
//! slots of the leaves that were created with `requires_grad`. Parameters
//! live outside the graph in a [`ParamSet`] and are bound into a fresh graph
//! for each forward pass.
//!
//! All operators are generic over [`Scalar`], so the same networks run in
//! `f32` for training and `f64` for finite-difference checks.

mod conv;
mod graph;
mod init;
mod optim;
mod params;
mod scalar;
mod schedule;
mod tensor;

pub use graph::{Graph, Var};
pub use init::{fan_in_uniform, init_conv};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{Param, ParamSet};
pub use scalar::Scalar;
pub use schedule::PolySchedule;
pub use tensor::Tensor;

/// Output extent of a convolution along one axis, or `None` when the
/// configuration produces an empty output.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if kernel == 0 || stride == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}
