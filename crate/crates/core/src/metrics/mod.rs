//! Long-term tracking scores, robustness, latency and pose-impact metrics.
//!
//! All functions are pure over one sequence; dataset-level numbers come from
//! [`aggregate`].

mod aggregate;
mod latency;
mod longterm;
mod pose;
pub mod report;
mod robustness;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBox;

pub use aggregate::{aggregate, AggregateRow, GroupKey, SequenceResult};
pub use latency::{latency_profile, LatencyProfile};
pub use longterm::{fscore_optimize, pr_re_f, threshold_integral, LTEvalResult, PrRe};
pub use pose::{mpjpe, pck, Normalizer};
pub use robustness::{gsr, gsr_curve, GsrOptions, GSR_WINDOWS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("trace has {trace} entries but the sequence has {frames} frames")]
    LengthMismatch { trace: usize, frames: usize },
    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),
    #[error("recovery window must be at least one frame")]
    ZeroWindow,
    #[error("fps must be positive, got {0}")]
    Fps(f64),
    #[error("processing cost at frame {frame} is negative or not finite: {cost}")]
    Cost { frame: usize, cost: f64 },
    #[error("ground-truth pose lacks the {0} keypoint")]
    MissingJoint(&'static str),
    #[error("no keypoint is present in both poses")]
    NoMatchedJoints,
    #[error("normalizer must be positive, got {0}")]
    Normalizer(f64),
    #[error("nothing to aggregate in group {0}")]
    EmptyGroup(String),
}

/// One frame of tracker output. An absent box means the tracker reports the
/// target as not present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub bbox: Option<BBox>,
    pub confidence: f64,
}

impl Prediction {
    pub fn new(bbox: BBox, confidence: f64) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(MetricsError::Confidence(confidence));
        }
        Ok(Self { bbox: Some(bbox), confidence })
    }

    pub fn absent() -> Self {
        Self { bbox: None, confidence: 0.0 }
    }

    pub fn is_present(&self) -> bool {
        self.bbox.is_some()
    }
}

/// Per-frame predictions aligned with a video. `init_frame` marks the entry
/// that holds the initialization box; it is never scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTrace {
    pub predictions: Vec<Prediction>,
    pub init_frame: Option<usize>,
}

impl PredictionTrace {
    pub fn new(predictions: Vec<Prediction>, init_frame: Option<usize>) -> Self {
        Self { predictions, init_frame }
    }

    /// Trace of a sequence on which the tracker was never started.
    pub fn all_absent(frames: usize) -> Self {
        Self { predictions: vec![Prediction::absent(); frames], init_frame: None }
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}
