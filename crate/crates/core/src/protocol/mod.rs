//! One-pass evaluation and the tracker backend abstraction.
//!
//! A backend only ever sees frame geometry and timing after initialization;
//! ground truth stays with the runner.

mod files;
mod trace_backend;
pub mod wire;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::MCVideo;
use crate::geometry::{BBox, FrameDims};
use crate::metrics::{MetricsError, Prediction, PredictionTrace};

pub use files::{parse_detections, parse_trace, serialize_detections, serialize_trace};
pub use trace_backend::TraceBackend;
pub use wire::ExternBackend;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend used before init")]
    NotInitialized,
    #[error("backend does not support {0}")]
    Unsupported(&'static str),
    #[error("trace: {0}")]
    Trace(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("peer failed: {0}")]
    PeerFailed(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BackendError {
    /// True for failures of a foreign peer process or connection.
    pub fn is_peer_failure(&self) -> bool {
        matches!(self, BackendError::Protocol(_) | BackendError::PeerFailed(_))
    }
}

#[derive(Debug, Error)]
pub enum OpeError {
    #[error("no detection reached the initialization threshold")]
    NoInit,
    #[error("detection stream covers {stream} frames, video has {frames}")]
    StreamLength { stream: usize, frames: usize },
    #[error("backend failed at frame {frame}: {source}")]
    Backend {
        frame: usize,
        #[source]
        source: BackendError,
    },
}

/// What a backend is told about a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameContext {
    pub t: usize,
    pub dims: FrameDims,
    /// Seconds since the first frame, `t / fps`.
    pub timestamp: f64,
    /// Length of the sequence being processed.
    pub frames: usize,
    /// Image for backends that resolve pixels themselves.
    pub image_path: Option<PathBuf>,
}

impl FrameContext {
    pub fn for_video(video: &MCVideo, t: usize) -> Self {
        Self {
            t,
            dims: video.dims(),
            timestamp: t as f64 / video.meta.fps,
            frames: video.len(),
            image_path: None,
        }
    }
}

/// A single-target tracker driven frame by frame.
pub trait TrackerBackend: Send {
    fn name(&self) -> String;

    fn init(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError>;

    fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError>;

    /// Restart from scratch on `bbox`. Defaults to a fresh `init`.
    fn reinit(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError> {
        self.init(ctx, bbox)
    }

    fn supports_reference_box(&self) -> bool {
        false
    }

    /// Moves the box the next search region is computed from.
    fn set_reference_box(&mut self, _bbox: BBox) -> Result<(), BackendError> {
        Err(BackendError::Unsupported("set_reference_box"))
    }

    /// Side of the search region relative to the target size.
    fn search_area_factor(&self) -> f64 {
        5.0
    }

    /// Backend-specific record of the run, written next to the reports.
    fn diagnostics(&self) -> Option<serde_json::Value> {
        None
    }
}

impl<T: TrackerBackend + ?Sized> TrackerBackend for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn init(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError> {
        (**self).init(ctx, bbox)
    }
    fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
        (**self).update(ctx)
    }
    fn reinit(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError> {
        (**self).reinit(ctx, bbox)
    }
    fn supports_reference_box(&self) -> bool {
        (**self).supports_reference_box()
    }
    fn set_reference_box(&mut self, bbox: BBox) -> Result<(), BackendError> {
        (**self).set_reference_box(bbox)
    }
    fn search_area_factor(&self) -> f64 {
        (**self).search_area_factor()
    }
    fn diagnostics(&self) -> Option<serde_json::Value> {
        (**self).diagnostics()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
}

/// Detector output for every frame of a video.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionStream {
    pub frames: Vec<Vec<Detection>>,
}

impl DetectionStream {
    pub fn new(frames: Vec<Vec<Detection>>) -> Self {
        Self { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn at(&self, t: usize) -> &[Detection] {
        self.frames.get(t).map_or(&[], Vec::as_slice)
    }

    /// First frame holding a detection scored at least `threshold`, and the
    /// chosen detection there: highest score, then larger area, then the
    /// lexicographically smallest `(x, y, w, h)`.
    pub fn first_qualifying(&self, threshold: f64) -> Option<(usize, Detection)> {
        self.frames.iter().enumerate().find_map(|(t, dets)| {
            dets.iter()
                .filter(|d| d.score >= threshold)
                .copied()
                .reduce(|best, d| if prefer(&d, &best) { d } else { best })
                .map(|d| (t, d))
        })
    }
}

fn prefer(a: &Detection, b: &Detection) -> bool {
    use std::cmp::Ordering::*;
    let key = |d: &Detection| [d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h];
    match a.score.total_cmp(&b.score) {
        Greater => true,
        Less => false,
        Equal => match a.bbox.area().total_cmp(&b.bbox.area()) {
            Greater => true,
            Less => false,
            Equal => key(a).iter().zip(key(b)).map(|(x, y)| x.total_cmp(&y)).find(|o| *o != Equal) == Some(Less),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitPolicy {
    GroundTruth,
    Detector { stream: DetectionStream, threshold: f64 },
}

impl InitPolicy {
    pub const DEFAULT_DETECTOR_THRESHOLD: f64 = 0.5;

    pub fn detector(stream: DetectionStream) -> Self {
        InitPolicy::Detector { stream, threshold: Self::DEFAULT_DETECTOR_THRESHOLD }
    }
}

/// Output of one OPE run.
#[derive(Debug, Clone, PartialEq)]
pub struct OpeRun {
    pub trace: PredictionTrace,
    pub init_frame: usize,
    /// Seconds spent in `init`.
    pub init_cost: f64,
    /// Seconds spent in `update` per frame; zero up to and including the
    /// initialization frame.
    pub frame_costs: Vec<f64>,
}

pub fn run_ope(backend: &mut dyn TrackerBackend, video: &MCVideo, policy: &InitPolicy) -> Result<OpeRun, OpeError> {
    run_ope_inner(backend, video, policy, None)
}

/// [`run_ope`] with `image_dir/{t:06}.jpg` passed to the backend per frame.
pub fn run_ope_with_images(
    backend: &mut dyn TrackerBackend,
    video: &MCVideo,
    policy: &InitPolicy,
    image_dir: &Path,
) -> Result<OpeRun, OpeError> {
    run_ope_inner(backend, video, policy, Some(image_dir))
}

fn run_ope_inner(
    backend: &mut dyn TrackerBackend,
    video: &MCVideo,
    policy: &InitPolicy,
    image_dir: Option<&Path>,
) -> Result<OpeRun, OpeError> {
    let frames = video.len();
    let (init_frame, init_box) = match policy {
        InitPolicy::GroundTruth => (0, video.frames[0].bbox),
        InitPolicy::Detector { stream, threshold } => {
            if stream.len() != frames {
                return Err(OpeError::StreamLength { stream: stream.len(), frames });
            }
            let (t, d) = stream.first_qualifying(*threshold).ok_or(OpeError::NoInit)?;
            (t, d.bbox)
        }
    };
    let ctx = |t: usize| {
        let mut c = FrameContext::for_video(video, t);
        c.image_path = image_dir.map(|d| d.join(format!("{t:06}.jpg")));
        c
    };

    let mut predictions = vec![Prediction::absent(); frames];
    let mut frame_costs = vec![0.0; frames];
    let start = Instant::now();
    backend
        .init(&ctx(init_frame), init_box)
        .map_err(|source| OpeError::Backend { frame: init_frame, source })?;
    let init_cost = start.elapsed().as_secs_f64();
    predictions[init_frame] = Prediction { bbox: Some(init_box), confidence: 1.0 };

    for t in init_frame + 1..frames {
        let c = ctx(t);
        let start = Instant::now();
        let p = backend.update(&c).map_err(|source| OpeError::Backend { frame: t, source })?;
        frame_costs[t] = start.elapsed().as_secs_f64();
        if !(0.0..=1.0).contains(&p.confidence) {
            return Err(OpeError::Backend { frame: t, source: MetricsError::Confidence(p.confidence).into() });
        }
        predictions[t] = p;
    }
    Ok(OpeRun { trace: PredictionTrace::new(predictions, Some(init_frame)), init_frame, init_cost, frame_costs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::test_support::video_with_cameras;

    /// Echoes the ground truth it was built with and records what it was told.
    struct Echo {
        boxes: Vec<BBox>,
        seen: Vec<usize>,
        started: bool,
    }

    impl TrackerBackend for Echo {
        fn name(&self) -> String {
            "echo".into()
        }
        fn init(&mut self, ctx: &FrameContext, _b: BBox) -> Result<(), BackendError> {
            self.started = true;
            self.seen.push(ctx.t);
            Ok(())
        }
        fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
            if !self.started {
                return Err(BackendError::NotInitialized);
            }
            self.seen.push(ctx.t);
            Ok(Prediction::new(self.boxes[ctx.t], 1.0)?)
        }
    }

    #[test]
    fn ground_truth_init_reproduces_oracle() {
        let v = video_with_cameras("v", &[1; 12]);
        let mut b = Echo { boxes: v.boxes().collect(), seen: vec![], started: false };
        let run = run_ope(&mut b, &v, &InitPolicy::GroundTruth).unwrap();
        assert_eq!(run.init_frame, 0);
        assert_eq!(b.seen, (0..12).collect::<Vec<_>>());
        let boxes: Vec<BBox> = run.trace.predictions.iter().map(|p| p.bbox.unwrap()).collect();
        assert_eq!(boxes, v.boxes().collect::<Vec<_>>());
        assert_eq!(run.frame_costs.len(), 12);
    }

    fn det(x: f64, score: f64) -> Detection {
        Detection { bbox: BBox::new(x, 0.0, 10.0, 10.0), score }
    }

    #[test]
    fn detector_init_at_first_qualifying_frame() {
        let v = video_with_cameras("v", &[1; 5]);
        let stream = DetectionStream::new(vec![vec![det(0.0, 0.3)], vec![det(0.0, 0.4)], vec![det(7.0, 0.6)], vec![], vec![]]);
        let mut b = Echo { boxes: v.boxes().collect(), seen: vec![], started: false };
        let run = run_ope(&mut b, &v, &InitPolicy::detector(stream)).unwrap();
        assert_eq!(run.init_frame, 2);
        assert!(run.trace.predictions[..2].iter().all(|p| !p.is_present()));
        assert_eq!(run.trace.predictions[2].bbox, Some(BBox::new(7.0, 0.0, 10.0, 10.0)));
        assert_eq!(b.seen, vec![2, 3, 4]);
    }

    #[test]
    fn detector_without_qualifying_detection() {
        let v = video_with_cameras("v", &[1; 2]);
        let stream = DetectionStream::new(vec![vec![det(0.0, 0.1)], vec![]]);
        let mut b = Echo { boxes: v.boxes().collect(), seen: vec![], started: false };
        assert!(matches!(run_ope(&mut b, &v, &InitPolicy::detector(stream)), Err(OpeError::NoInit)));
        let short = DetectionStream::new(vec![vec![]]);
        assert!(matches!(run_ope(&mut b, &v, &InitPolicy::detector(short)), Err(OpeError::StreamLength { .. })));
    }

    #[test]
    fn init_tie_break() {
        let big = Detection { bbox: BBox::new(50.0, 0.0, 20.0, 20.0), score: 0.9 };
        let left = Detection { bbox: BBox::new(1.0, 0.0, 10.0, 10.0), score: 0.9 };
        let right = Detection { bbox: BBox::new(5.0, 0.0, 10.0, 10.0), score: 0.9 };
        let best = Detection { bbox: BBox::new(90.0, 0.0, 1.0, 1.0), score: 0.95 };
        let s = DetectionStream::new(vec![vec![right, left]]);
        assert_eq!(s.first_qualifying(0.5).unwrap().1, left);
        let s = DetectionStream::new(vec![vec![right, big, left]]);
        assert_eq!(s.first_qualifying(0.5).unwrap().1, big);
        let s = DetectionStream::new(vec![vec![right, big, best]]);
        assert_eq!(s.first_qualifying(0.5).unwrap().1, best);
    }

    #[test]
    fn image_paths_are_forwarded() {
        struct Paths(Vec<Option<PathBuf>>);
        impl TrackerBackend for Paths {
            fn name(&self) -> String {
                "paths".into()
            }
            fn init(&mut self, ctx: &FrameContext, _b: BBox) -> Result<(), BackendError> {
                self.0.push(ctx.image_path.clone());
                Ok(())
            }
            fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
                self.0.push(ctx.image_path.clone());
                Ok(Prediction::absent())
            }
        }
        let v = video_with_cameras("v", &[1; 2]);
        let mut b = Paths(vec![]);
        run_ope_with_images(&mut b, &v, &InitPolicy::GroundTruth, Path::new("/frames")).unwrap();
        assert_eq!(b.0[1].as_deref(), Some(Path::new("/frames/000001.jpg")));
    }

    #[test]
    fn out_of_range_confidence_fails_the_run() {
        struct Bad;
        impl TrackerBackend for Bad {
            fn name(&self) -> String {
                "bad".into()
            }
            fn init(&mut self, _: &FrameContext, _: BBox) -> Result<(), BackendError> {
                Ok(())
            }
            fn update(&mut self, _: &FrameContext) -> Result<Prediction, BackendError> {
                Ok(Prediction { bbox: None, confidence: 1.3 })
            }
        }
        let v = video_with_cameras("v", &[1; 3]);
        assert!(matches!(run_ope(&mut Bad, &v, &InitPolicy::GroundTruth), Err(OpeError::Backend { frame: 1, .. })));
    }
}
