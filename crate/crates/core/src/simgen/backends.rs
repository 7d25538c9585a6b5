use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{rng, streams};
use crate::datamodel::MCVideo;
use crate::geometry::{BBox, Point};
use crate::metrics::Prediction;
use crate::protocol::{BackendError, FrameContext, TrackerBackend};

/// A call a test backend received.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Call {
    Init(usize),
    Update(usize),
    Reinit(usize),
    SetReference(BBox),
}

/// Replays a fixed per-frame script and records every call.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    name: String,
    script: Vec<Prediction>,
    started: bool,
    calls: Vec<Call>,
}

impl ScriptedBackend {
    pub fn new(name: impl Into<String>, script: Vec<Prediction>) -> Self {
        Self { name: name.into(), script, started: false, calls: Vec::new() }
    }

    /// Ground truth at full confidence on frames `0..k`, absent afterwards.
    pub fn absent_after(video: &MCVideo, k: usize) -> Self {
        let script = video
            .boxes()
            .enumerate()
            .map(|(t, b)| if t < k { Prediction { bbox: Some(b), confidence: 1.0 } } else { Prediction::absent() })
            .collect();
        Self::new(format!("absent-after-{k}"), script)
    }

    pub fn calls(&self) -> &[Call] {
        &self.calls
    }

    /// Frames on which `update` was called.
    pub fn updates(&self) -> Vec<usize> {
        self.calls.iter().filter_map(|c| if let Call::Update(t) = c { Some(*t) } else { None }).collect()
    }

    pub fn reinits(&self) -> Vec<usize> {
        self.calls.iter().filter_map(|c| if let Call::Reinit(t) = c { Some(*t) } else { None }).collect()
    }
}

impl TrackerBackend for ScriptedBackend {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn init(&mut self, ctx: &FrameContext, _bbox: BBox) -> Result<(), BackendError> {
        if self.script.len() != ctx.frames {
            return Err(BackendError::Trace(format!("script covers {} frames, sequence has {}", self.script.len(), ctx.frames)));
        }
        self.started = true;
        self.calls.push(Call::Init(ctx.t));
        Ok(())
    }

    fn reinit(&mut self, ctx: &FrameContext, _bbox: BBox) -> Result<(), BackendError> {
        if !self.started {
            return Err(BackendError::NotInitialized);
        }
        self.calls.push(Call::Reinit(ctx.t));
        Ok(())
    }

    fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
        if !self.started {
            return Err(BackendError::NotInitialized);
        }
        self.calls.push(Call::Update(ctx.t));
        self.script.get(ctx.t).copied().ok_or_else(|| BackendError::Trace(format!("script has no frame {}", ctx.t)))
    }

    fn supports_reference_box(&self) -> bool {
        true
    }

    fn set_reference_box(&mut self, bbox: BBox) -> Result<(), BackendError> {
        self.calls.push(Call::SetReference(bbox));
        Ok(())
    }
}

/// Emits ground truth with seeded center jitter and a confidence schedule.
///
/// The jitter is drawn up front, so the output for a frame does not depend on
/// which calls came before it.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    boxes: Vec<BBox>,
    confidence: Vec<f64>,
    started: bool,
    calls: Vec<Call>,
}

impl OracleBackend {
    pub fn new(video: &MCVideo, jitter_sigma: f64, seed: u64) -> Result<Self, BackendError> {
        if !(jitter_sigma >= 0.0 && jitter_sigma.is_finite()) {
            return Err(BackendError::Config(format!("jitter sigma {jitter_sigma} must be finite and non-negative")));
        }
        let mut r = rng(seed, streams::ORACLE);
        let boxes = video
            .boxes()
            .map(|b| {
                if jitter_sigma == 0.0 {
                    return b;
                }
                let n = Normal::new(0.0, jitter_sigma).expect("checked sigma");
                let c = b.center();
                BBox::from_center(Point { x: c.x + n.sample(&mut r), y: c.y + n.sample(&mut r) }, b.w, b.h)
            })
            .collect();
        Ok(Self { boxes, confidence: vec![1.0; video.len()], started: false, calls: Vec::new() })
    }

    /// Exact ground truth at confidence 1.
    pub fn perfect(video: &MCVideo) -> Self {
        Self::new(video, 0.0, 0).expect("zero jitter is valid")
    }

    /// Sets γ on `frames`.
    pub fn with_confidence(mut self, frames: std::ops::Range<usize>, gamma: f64) -> Self {
        for t in frames {
            if let Some(c) = self.confidence.get_mut(t) {
                *c = gamma;
            }
        }
        self
    }

    pub fn calls(&self) -> &[Call] {
        &self.calls
    }
}

impl TrackerBackend for OracleBackend {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn init(&mut self, ctx: &FrameContext, _bbox: BBox) -> Result<(), BackendError> {
        if self.boxes.len() != ctx.frames {
            return Err(BackendError::Trace(format!("oracle covers {} frames, sequence has {}", self.boxes.len(), ctx.frames)));
        }
        self.started = true;
        self.calls.push(Call::Init(ctx.t));
        Ok(())
    }

    fn reinit(&mut self, ctx: &FrameContext, _bbox: BBox) -> Result<(), BackendError> {
        self.calls.push(Call::Reinit(ctx.t));
        self.started = true;
        Ok(())
    }

    fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
        if !self.started {
            return Err(BackendError::NotInitialized);
        }
        self.calls.push(Call::Update(ctx.t));
        let bbox = *self.boxes.get(ctx.t).ok_or_else(|| BackendError::Trace(format!("no frame {}", ctx.t)))?;
        Ok(Prediction { bbox: Some(bbox), confidence: self.confidence[ctx.t] })
    }

    fn supports_reference_box(&self) -> bool {
        true
    }

    fn set_reference_box(&mut self, bbox: BBox) -> Result<(), BackendError> {
        self.calls.push(Call::SetReference(bbox));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{fusion_init, FramePath, FusionConfig};
    use crate::metrics::{fscore_optimize, gsr, gsr_curve, GsrOptions};
    use crate::protocol::{run_ope, InitPolicy};
    use crate::simgen::{gen_mc_sequence, SimConfig};

    fn video() -> MCVideo {
        gen_mc_sequence(&SimConfig { frames: 40, cuts: vec![20], seed: 1, ..Default::default() }).unwrap()
    }

    #[test]
    fn perfect_oracle_scores_one() {
        let v = video();
        let run = run_ope(&mut OracleBackend::perfect(&v), &v, &InitPolicy::GroundTruth).unwrap();
        assert_eq!(fscore_optimize(&run.trace, &v.frames, true).unwrap().best_f, 1.0);
        assert!(gsr_curve(&run.trace, &v.frames, &GsrOptions::default()).unwrap().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn absent_after_k_gives_k_over_t() {
        let v = video();
        for k in [1usize, 7, 30] {
            let run = run_ope(&mut ScriptedBackend::absent_after(&v, k), &v, &InitPolicy::GroundTruth).unwrap();
            let g = gsr(&run.trace, &v.frames, 1, &GsrOptions::default()).unwrap();
            assert_eq!(g, k as f64 / 40.0, "k = {k}");
        }
    }

    #[test]
    fn oracle_dip_triggers_fallback_on_those_frames() {
        let v = video();
        let ctx = |t| FrameContext::for_video(&v, t);
        let tracker = OracleBackend::perfect(&v).with_confidence(10..13, 0.3);
        let redet = OracleBackend::perfect(&v).with_confidence(0..40, 0.2);
        let mut f = fusion_init(FusionConfig::default(), tracker, redet, &ctx(0), v.frames[0].bbox).unwrap();
        for t in 1..40 {
            f.update(&ctx(t)).unwrap();
        }
        let fallback: Vec<usize> = f.log().iter().filter(|r| r.path == FramePath::Fallback).map(|r| r.t).collect();
        assert_eq!(fallback, vec![10, 11, 12]);
    }

    #[test]
    fn jitter_is_seeded_and_bounded_by_sigma() {
        let v = video();
        let a = OracleBackend::new(&v, 2.0, 5).unwrap();
        let b = OracleBackend::new(&v, 2.0, 5).unwrap();
        assert_eq!(a.boxes, b.boxes);
        assert_ne!(a.boxes, OracleBackend::new(&v, 2.0, 6).unwrap().boxes);
        assert!(OracleBackend::new(&v, -1.0, 0).is_err());
    }

    #[test]
    fn script_length_must_match() {
        let v = video();
        let mut s = ScriptedBackend::new("s", vec![Prediction::absent(); 5]);
        assert!(run_ope(&mut s, &v, &InitPolicy::GroundTruth).is_err());
    }
}
