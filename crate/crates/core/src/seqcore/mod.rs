//! Numeric substrate: channel-by-time matrices, dilated and pointwise 1-D
//! convolutions with asymmetric zero padding, elementwise activations, and a
//! finite-difference gradient checker.
//!
//! All arithmetic is 64-bit. Forward passes are expressed column-by-column
//! (one output frame at a time) with a fixed summation order — kernel tap
//! outer, input channel inner — so the offline and the streaming evaluation
//! paths run the identical sequence of floating-point operations.

mod conv;
mod gradcheck;
mod matrix;
mod ops;

pub use conv::{DilatedConvLayer, KERNEL_SIZE, PointwiseConvLayer};
pub use gradcheck::{FD_STEP, GradCheckReport, NumericError, gradient_check};
pub use matrix::{ChannelTimeMatrix, ColumnSource};
pub use ops::{
    DropoutMask, dropout, dropout_backward, relu, relu_backward, relu_backward_in_place,
    relu_in_place, softmax_backward, softmax_over_channels,
};
pub(crate) use ops::softmax_column;

/// Shape mismatch between an operation's inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("shape mismatch: expected {expected} channels, got {got}")]
pub struct ShapeError {
    pub expected: usize,
    pub got: usize,
}
