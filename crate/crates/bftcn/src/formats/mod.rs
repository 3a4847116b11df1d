//! On-disk formats: feature tensors, label files, checkpoints, and the
//! dataset manifest tying them together.

mod checkpoint;
mod features;
mod labels;
mod manifest;

pub use checkpoint::{
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION, CheckpointHeader, Precision, read_checkpoint,
    write_checkpoint,
};
pub use features::{FEATURE_MAGIC, FEATURE_VERSION, read_features, write_features};
pub use labels::{LabelFileFormat, read_labels, write_labels};
pub use manifest::{DatasetManifest, LoadedVideo, VideoEntry, load_videos, read_manifest};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: bad magic, not a {expected} file")]
    BadMagic { path: PathBuf, expected: &'static str },
    #[error("{path}: unsupported format version {got} (supported: {supported})")]
    UnsupportedVersion { path: PathBuf, got: u32, supported: u32 },
    #[error("{path}: truncated: expected {expected} bytes, found {actual}")]
    Truncated { path: PathBuf, expected: u64, actual: u64 },
    #[error("{path}: invalid dimensions (T and N_f must be at least 1)")]
    BadDims { path: PathBuf },
    #[error("{path}: checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    ChecksumMismatch { path: PathBuf, stored: u64, computed: u64 },
    #[error("{path}: invalid header: {source}")]
    HeaderJson { path: PathBuf, source: serde_json::Error },
    #[error("{path}: parameter count {actual} does not match header {expected}")]
    ParamCountMismatch { path: PathBuf, expected: usize, actual: usize },
    #[error("{path}: invalid model configuration: {source}")]
    BadConfig { path: PathBuf, source: bftcn_core::window::ConfigError },
    #[error("{path}:{line}: {message}")]
    LabelParse { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: segment starts at {got} but previous segment ends at {expected} (gap or overlap)")]
    SegmentDiscontinuity { path: PathBuf, line: usize, expected: usize, got: usize },
    #[error("{path}: unknown label token {token:?} (classes: {classes:?})")]
    UnknownLabel { path: PathBuf, token: String, classes: Vec<String> },
    #[error("{path}: no labels")]
    EmptyLabels { path: PathBuf },
    #[error("{path}: labels cover {labels} frames but features hold {frames}")]
    LabelLengthMismatch { path: PathBuf, labels: usize, frames: usize },
    #[error("class list mismatch: checkpoint has {checkpoint:?}, manifest has {manifest:?}")]
    ClassListMismatch { checkpoint: Vec<String>, manifest: Vec<String> },
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}
