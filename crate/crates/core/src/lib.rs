//! Airgun pulse detection and early/late-time acoustic feature extraction
//! for multi-channel hydrophone recordings.
//!
//! The pipeline reads calibrated pressure from WAV archives ([`signal_io`]),
//! applies band weightings ([`weighting`]), detects pulses ([`pulse_detect`]),
//! lays out early and late windows ([`windows`]), measures levels
//! ([`measures`]) and writes one catalog row per pulse and weighting
//! ([`pipeline`], [`catalog`]). [`runner`] executes a deployment serially or in
//! parallel; [`synth`] generates test surveys with ground truth.

pub mod catalog;
pub mod error;
pub mod measures;
pub mod pipeline;
pub mod pulse_detect;
pub mod runner;
pub mod signal_io;
pub mod stream;
pub mod synth;
pub mod weighting;
pub mod windows;

pub use error::{ChannelFailure, Error, Result};
