//! Dense tensors, initialization, optimization and gradient checking.

mod dd;
mod gradcheck;
mod init;
mod optim;
mod rng;
mod tensor;

pub use dd::Dd;
pub use gradcheck::{grad_check, grad_check_extended, Differentiable, GradCheckReport, DEFAULT_EPS, EXTENDED_EPS};
pub use init::{normalized_init, normalized_limit, zero_bias};
pub use optim::{adam_step, add_l2, clip_global_norm, global_norm, AdamConfig, AdamState};
pub use rng::Rng;
pub(crate) use tensor::{gemv_acc, gemv_t_acc, outer_acc, sigmoid};
pub use tensor::{softmax, Real, Tensor};
