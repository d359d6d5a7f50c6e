//! Update-pacing ensemble wrapper for single-object visual trackers.
//!
//! A base tracker is fanned out into `n` members whose model updates stop at
//! staggered interval boundaries. Each member tracks a window forward, then
//! backward from its last box; the pair whose trajectories agree best (in
//! position and appearance) wins the window and its state seeds the next one.

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod fft;
pub mod geometry;
pub mod pipeline;
pub mod sequence;
pub mod synth;
pub mod tracker;
pub mod trackers;

pub use error::{Error, Result};
pub use geometry::{extract_patch, iou, to_grayscale, BoundingBox, Frame, Patch, PatchSize};
pub use tracker::{Tracker, TrackerConfig, TrackerKind, TrackerState};
pub use pipeline::{run_baseline, run_mts, MtsConfig, TrackingResult};
pub use sequence::{load_otb, Sequence};
