use super::{Sort, SortConfig, SortError};
use crate::geometry::BBox;
use crate::metrics::Prediction;
use crate::protocol::{BackendError, DetectionStream, FrameContext, TrackerBackend};

impl From<SortError> for BackendError {
    fn from(e: SortError) -> Self {
        match e {
            SortError::Config(m) => BackendError::Config(m),
            other => BackendError::Trace(other.to_string()),
        }
    }
}

/// Single-target view of a multi-target tracker: follows the track spawned
/// from the initialization box and nothing else.
///
/// Confidence is 1 on frames where the track was matched and
/// `1 / (1 + time_since_update)` while it coasts; once deleted the target is
/// reported absent for the rest of the run.
#[derive(Debug, Clone)]
pub struct SortBackend {
    detections: DetectionStream,
    config: SortConfig,
    state: Option<(Sort, u64)>,
    last_t: usize,
}

impl SortBackend {
    pub fn new(detections: DetectionStream, config: SortConfig) -> Result<Self, BackendError> {
        config.validate()?;
        Ok(Self { detections, config, state: None, last_t: 0 })
    }

    pub fn sort(&self) -> Option<&Sort> {
        self.state.as_ref().map(|(s, _)| s)
    }
}

impl TrackerBackend for SortBackend {
    fn name(&self) -> String {
        "sort".into()
    }

    fn init(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError> {
        if self.detections.len() < ctx.frames {
            return Err(BackendError::Trace(format!(
                "detection stream covers {} frames, sequence has {}",
                self.detections.len(),
                ctx.frames
            )));
        }
        let mut sort = Sort::new(self.config)?;
        let id = sort.spawn(&bbox, self.config.min_hits)?;
        self.state = Some((sort, id));
        self.last_t = ctx.t;
        Ok(())
    }

    fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
        let (sort, id) = self.state.as_mut().ok_or(BackendError::NotInitialized)?;
        let dets: Vec<BBox> = self
            .detections
            .at(ctx.t)
            .iter()
            .filter(|d| d.score >= self.config.min_score && d.bbox.w > 0.0 && d.bbox.h > 0.0)
            .map(|d| d.bbox)
            .collect();
        let dt = ctx.t.saturating_sub(self.last_t).max(1) as f64;
        self.last_t = ctx.t;
        sort.step(&dets, dt)?;
        Ok(match sort.track(*id) {
            Some(t) => Prediction { bbox: Some(t.bbox()), confidence: 1.0 / (1.0 + t.time_since_update as f64) },
            None => Prediction::absent(),
        })
    }
}
