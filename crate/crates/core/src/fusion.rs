//! Confidence-gated switching between a precise tracker and a wide-search
//! re-detector.
//!
//! Each frame the tracker runs first. A confident result (γ above the gate)
//! is output as is and re-centres the re-detector's search region around it.
//! Otherwise the re-detector runs and its result is output; if that result is
//! confident the tracker is re-initialized on it.

use serde::{Deserialize, Serialize};

use crate::geometry::{clip_to_frame, relocalization_reference, BBox};
use crate::metrics::Prediction;
use crate::protocol::{BackendError, FrameContext, TrackerBackend};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Outputs with γ at or below this fall back to the re-detector.
    pub gate: f64,
    /// Search area factor meant for the tracker instance.
    pub tracker_factor: f64,
    /// Search area factor used for the re-detector's reference box.
    pub redetector_factor: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { gate: 0.5, tracker_factor: 3.0, redetector_factor: 5.0 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.gate > 0.0 && self.gate < 1.0) {
            return Err(BackendError::Config(format!("gate {} outside (0, 1)", self.gate)));
        }
        if !(self.tracker_factor > 0.0 && self.redetector_factor > 0.0) {
            return Err(BackendError::Config("search area factors must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FramePath {
    /// Tracker only.
    Confident,
    /// Tracker, then re-detector.
    Fallback,
}

/// What happened on one processed frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: usize,
    pub path: FramePath,
    pub tracker_confidence: f64,
    pub redetector_confidence: Option<f64>,
    pub reinit: bool,
    /// Reference box handed to the re-detector on a confident frame.
    pub reference: Option<BBox>,
}

pub struct Fusion<T, R> {
    config: FusionConfig,
    tracker: T,
    redetector: R,
    started: bool,
    last: Option<Prediction>,
    log: Vec<FrameRecord>,
}

impl<T: TrackerBackend, R: TrackerBackend> Fusion<T, R> {
    pub fn new(config: FusionConfig, tracker: T, redetector: R) -> Result<Self, BackendError> {
        config.validate()?;
        if !redetector.supports_reference_box() {
            return Err(BackendError::Config(format!("re-detector {} cannot take a reference box", redetector.name())));
        }
        Ok(Self { config, tracker, redetector, started: false, last: None, log: Vec::new() })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn log(&self) -> &[FrameRecord] {
        &self.log
    }

    pub fn last_output(&self) -> Option<Prediction> {
        self.last
    }

    pub fn tracker(&self) -> &T {
        &self.tracker
    }

    pub fn redetector(&self) -> &R {
        &self.redetector
    }

    fn start(&mut self, ctx: &FrameContext, bbox: BBox, fresh: bool) -> Result<(), BackendError> {
        let b = clip_to_frame(&bbox, ctx.dims);
        if b.area() <= 0.0 {
            return Err(BackendError::Config(format!("initial box {bbox:?} lies outside the frame")));
        }
        if fresh {
            self.tracker.init(ctx, b)?;
            self.redetector.init(ctx, b)?;
        } else {
            self.tracker.reinit(ctx, b)?;
            self.redetector.reinit(ctx, b)?;
        }
        self.started = true;
        self.last = Some(Prediction { bbox: Some(b), confidence: 1.0 });
        Ok(())
    }
}

/// Builds a controller and initializes both instances on `b0`, clipped to the
/// frame.
pub fn fusion_init<T: TrackerBackend, R: TrackerBackend>(
    config: FusionConfig,
    tracker: T,
    redetector: R,
    ctx: &FrameContext,
    b0: BBox,
) -> Result<Fusion<T, R>, BackendError> {
    let mut f = Fusion::new(config, tracker, redetector)?;
    f.start(ctx, b0, true)?;
    Ok(f)
}

impl<T: TrackerBackend, R: TrackerBackend> TrackerBackend for Fusion<T, R> {
    fn name(&self) -> String {
        format!("fusion({},{})", self.tracker.name(), self.redetector.name())
    }

    fn init(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError> {
        self.start(ctx, bbox, true)
    }

    fn reinit(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError> {
        self.start(ctx, bbox, false)
    }

    fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
        if !self.started {
            return Err(BackendError::NotInitialized);
        }
        let gate = self.config.gate;
        let p = self.tracker.update(ctx)?;
        let mut rec = FrameRecord {
            t: ctx.t,
            path: FramePath::Confident,
            tracker_confidence: p.confidence,
            redetector_confidence: None,
            reinit: false,
            reference: None,
        };
        let out = if p.confidence > gate {
            if let Some(b) = p.bbox {
                // A frame narrower than tall has no valid reference; keep the
                // previous one.
                if let Ok(r) = relocalization_reference(&b, ctx.dims, self.config.redetector_factor) {
                    self.redetector.set_reference_box(r)?;
                    rec.reference = Some(r);
                }
            }
            p
        } else {
            let q = self.redetector.update(ctx)?;
            rec.path = FramePath::Fallback;
            rec.redetector_confidence = Some(q.confidence);
            if q.confidence > gate {
                if let Some(b) = q.bbox.map(|b| clip_to_frame(&b, ctx.dims)).filter(|b| b.area() > 0.0) {
                    self.tracker.reinit(ctx, b)?;
                    rec.reinit = true;
                }
            }
            q
        };
        self.log.push(rec);
        self.last = Some(out);
        Ok(out)
    }

    fn supports_reference_box(&self) -> bool {
        self.tracker.supports_reference_box()
    }

    fn set_reference_box(&mut self, bbox: BBox) -> Result<(), BackendError> {
        self.tracker.set_reference_box(bbox)
    }

    fn search_area_factor(&self) -> f64 {
        self.config.tracker_factor
    }

    fn diagnostics(&self) -> Option<serde_json::Value> {
        Some(serde_json::json!({ "config": self.config, "log": self.log }))
    }
}
