//! Temporal-convolution sequence labeling with a bounded future window.
//!
//! The crate implements multi-stage temporal convolutional networks (the
//! MS-TCN++ family) in two variants that trade output delay for accuracy:
//!
//! * `RR` — the reduced-receptive-field network with symmetric dilated
//!   convolutions; the future window shrinks only by making the network
//!   shallower.
//! * `BF` — the bounded-future network, where every dilated convolution is
//!   padded asymmetrically so that its reach into the future is capped at
//!   `w_max` frames, regardless of depth.
//!
//! [`window`] provides the exact frame arithmetic relating a network
//! configuration to its total future window (and hence the minimum output
//! delay of a correct online implementation). [`streaming`] realizes that
//! delay bound: frames go in one at a time and finalized predictions come
//! out exactly `future_window` frames behind, numerically equal to the
//! offline forward pass.
//!
//! Everything here is `no_std`-compatible (`alloc` required); file formats,
//! checkpoints and the command line live in the companion `bftcn` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod math;
pub mod metrics;
pub mod model;
pub mod probe;
pub mod seqcore;
pub mod streaming;
pub mod synth;
pub mod training;
pub mod window;

pub use model::{ModelParameters, build_model};
pub use seqcore::ChannelTimeMatrix;
pub use window::{LayerAddress, NetworkConfig, StageKind, Variant};
