//! File formats, experiment reports and the command-line surface for the
//! bounded-future temporal convolution engine in `bftcn-core`.

pub mod cli;
pub mod formats;
pub mod report;

pub use formats::FormatError;
