use std::path::Path;

use super::{parse_trace, BackendError, FrameContext, TrackerBackend};
use crate::geometry::BBox;
use crate::metrics::{Prediction, PredictionTrace};

/// Replays stored predictions verbatim.
///
/// Reference-box updates are accepted and recorded but cannot influence the
/// precomputed output.
#[derive(Debug, Clone)]
pub struct TraceBackend {
    name: String,
    trace: PredictionTrace,
    started: bool,
    reference_boxes: Vec<BBox>,
}

impl TraceBackend {
    pub fn new(name: impl Into<String>, trace: PredictionTrace) -> Self {
        Self { name: name.into(), trace, started: false, reference_boxes: Vec::new() }
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(format!("trace:{}", path.display()), parse_trace(&text)?))
    }

    pub fn reference_boxes(&self) -> &[BBox] {
        &self.reference_boxes
    }
}

impl TrackerBackend for TraceBackend {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn init(&mut self, ctx: &FrameContext, _bbox: BBox) -> Result<(), BackendError> {
        if self.trace.len() < ctx.frames {
            return Err(BackendError::Trace(format!(
                "trace has {} rows, sequence has {} frames",
                self.trace.len(),
                ctx.frames
            )));
        }
        self.started = true;
        Ok(())
    }

    fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
        if !self.started {
            return Err(BackendError::NotInitialized);
        }
        self.trace
            .predictions
            .get(ctx.t)
            .copied()
            .ok_or_else(|| BackendError::Trace(format!("no row for frame {}", ctx.t)))
    }

    fn supports_reference_box(&self) -> bool {
        true
    }

    fn set_reference_box(&mut self, bbox: BBox) -> Result<(), BackendError> {
        self.reference_boxes.push(bbox);
        Ok(())
    }
}
