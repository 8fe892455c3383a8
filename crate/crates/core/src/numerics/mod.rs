//! Dense linear algebra, differentiable layers, optimization and
//! gradient verification.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_check, FD_STEP};
pub use layers::{Activation, Gru, HasParams, Linear, Parameter};
pub use matrix::{softmax, softmax_backward, Matrix};
