//! Affective situation labeling.
//!
//! Turns an egocentric frame sequence, a wrist/head accelerometer stream and a
//! two-channel frontal EEG recording into per-frame arousal/valence labels, a
//! Gaussian-process affective curve over the valence–arousal plane, discrete
//! affective states, and EEG band-power / bicoherence features.
//!
//! The processing chain is:
//!
//! ```text
//! ingest ─┬─ flow ──────────┬─ affect ── curve
//!         ├─ saliency ─ motivation ─┘
//!         └─ eeg (gated by the accelerometer artifact series)
//! ```
//!
//! [`pipeline`] wires the stages together and writes the on-disk artifacts;
//! [`eval`] holds the rating-comparison metrics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affect;
pub mod curve;
pub mod eeg;
pub mod error;
pub mod eval;
pub mod flow;
pub mod ingest;
pub mod motivation;
pub mod pipeline;
pub mod saliency;

mod util;

pub use error::{Error, Result};
