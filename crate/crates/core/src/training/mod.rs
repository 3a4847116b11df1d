//! Training: the multi-stage segmentation loss (cross-entropy plus a
//! truncated smoothing term), Adam, and a deterministic training loop with
//! validation-based model selection.

mod adam;
mod loss;
mod run;

pub use adam::OptimizerState;
pub use loss::{LOG_PROB_FLOOR, LossConfig, mstcn_loss};
pub use run::{EpochRecord, TrainHistory, TrainOptions, TrainSample, train};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("label {label} out of range for {n_classes} classes at frame {frame}")]
    LabelOutOfRange { label: usize, n_classes: usize, frame: usize },
    #[error("labels length {labels} does not match {frames} frames")]
    LabelLengthMismatch { labels: usize, frames: usize },
    #[error("probability matrix has {got} channels, expected {expected}")]
    ClassCountMismatch { expected: usize, got: usize },
    #[error("non-finite gradient at parameter {index} (step {step})")]
    NonFiniteGradient { index: usize, step: u64 },
    #[error("gradient length {got} does not match parameter length {expected}")]
    GradientLengthMismatch { expected: usize, got: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}
