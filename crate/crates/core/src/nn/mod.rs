//! Layer-level building blocks with explicit forward/backward passes.
//!
//! Layers do not record a graph. Each forward returns whatever the matching
//! backward needs, and callers thread it through. Parameter gradients
//! accumulate into [`Param::grad`] until [`Param::zero_grad`] is called.

mod act;
mod conv;
mod gemm;
mod norm;
mod param;

pub use act::{dropout_backward, dropout_mask, Activation};
pub use conv::{Conv2d, ConvTranspose2d};
pub use norm::{BatchNorm2d, BatchNormCache};
pub use param::{NamedTensors, NamedTensorsMut, Param};

/// Train mode uses batch statistics and dropout; eval mode is a fixed function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
