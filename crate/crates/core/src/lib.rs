//! Tracking one athlete across multi-camera broadcast footage.
//!
//! The crate scores long-term single-target trackers (precision, recall and
//! F over confidence thresholds, robustness windows, real-time latency),
//! ships a SORT tracker and a confidence-gated fusion of two trackers, and
//! can simulate annotated datasets with camera cuts and occlusions. Trackers
//! in other processes plug in through a length-prefixed JSON protocol.
//!
//! The `examples/` directory has one program per capability; the
//! `slopetrack` binary wraps the same engine.

pub mod cli;
pub mod datamodel;
pub mod dataset;
pub mod fusion;
pub mod geometry;
pub mod metrics;
pub mod protocol;
pub mod simgen;
pub mod sort;
