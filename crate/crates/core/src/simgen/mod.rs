//! Seeded synthetic ground truth, detections and tracker backends.
//!
//! Every generator draws from ChaCha8 seeded once per artifact; each component
//! reads its own stream so extra draws in one cannot shift another.

mod backends;
mod dataset;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{DataError, Discipline, FrameAnnotation, MCVideo, VideoMeta, Visibility};
use crate::geometry::{clip_to_frame, iou, BBox, FrameDims, Point};
use crate::protocol::{Detection, DetectionStream};

pub use backends::{Call, OracleBackend, ScriptedBackend};
pub use dataset::{simulate_dataset, DatasetConfig};

/// Stream ids per component.
pub(crate) mod streams {
    pub const TRAJECTORY: u64 = 1;
    pub const DETECTIONS: u64 = 2;
    pub const ORACLE: u64 = 3;
    pub const DATASET: u64 = 4;
}

pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// A box pinned to a frame; the path is linear between consecutive keyframes
/// of the same camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t: usize,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub id: String,
    pub discipline: Discipline,
    pub frames: usize,
    pub fps: f64,
    pub dims: FrameDims,
    /// First frame of every camera after the first, increasing.
    pub cuts: Vec<usize>,
    /// Complete occlusions as `(start, length)`.
    pub occlusions: Vec<(usize, usize)>,
    /// Explicit trajectory. When empty one is drawn from the seed.
    pub keyframes: Vec<Keyframe>,
    /// Frames between generated keyframes.
    pub keyframe_spacing: usize,
    /// Largest generated center displacement per frame, pixels.
    pub max_speed: f64,
    /// Range of generated box heights, pixels.
    pub height_range: (f64, f64),
    /// Range of generated width / height ratios.
    pub aspect_range: (f64, f64),
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            id: "sim".into(),
            discipline: Discipline::AL,
            frames: 300,
            fps: 30.0,
            dims: FrameDims { width: 1280.0, height: 720.0 },
            cuts: Vec::new(),
            occlusions: Vec::new(),
            keyframes: Vec::new(),
            keyframe_spacing: 30,
            max_speed: 6.0,
            height_range: (60.0, 180.0),
            aspect_range: (0.4, 0.8),
            seed: 0,
        }
    }
}

/// Default length of a complete occlusion, frames.
pub const DEFAULT_OCCLUSION_LEN: usize = 15;

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps must be positive, got {}", self.fps));
        }
        FrameDims::new(self.dims.width, self.dims.height).map_err(|e| SimError::Config(e.to_string()))?;
        if self.cuts.iter().any(|&c| c == 0 || c >= self.frames) || self.cuts.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("cuts {:?} must increase strictly within 1..{}", self.cuts, self.frames));
        }
        for &(s, len) in &self.occlusions {
            if len == 0 || s + len > self.frames {
                return bad(format!("occlusion ({s}, {len}) outside 0..{}", self.frames));
            }
        }
        let (lo, hi) = self.height_range;
        if !(lo > 0.0 && lo <= hi && hi < self.dims.height) {
            return bad(format!("height range {:?} must lie in (0, {})", self.height_range, self.dims.height));
        }
        let (alo, ahi) = self.aspect_range;
        if !(alo > 0.0 && alo <= ahi && ahi * hi < self.dims.width) {
            return bad(format!("aspect range {:?} does not fit the frame", self.aspect_range));
        }
        if self.keyframe_spacing == 0 || self.max_speed.is_nan() || self.max_speed < 0.0 {
            return bad("keyframe spacing and speed must be positive".into());
        }
        for k in &self.keyframes {
            if k.t >= self.frames || k.bbox.validate().is_err() {
                return bad(format!("keyframe {k:?} invalid"));
            }
        }
        if self.keyframes.windows(2).any(|w| w[0].t >= w[1].t) {
            return bad("keyframes must be in increasing frame order".into());
        }
        Ok(())
    }

    /// `[start, end]` of every camera run.
    pub fn runs(&self) -> Vec<(usize, usize)> {
        let mut starts = vec![0];
        starts.extend(&self.cuts);
        starts.iter().enumerate().map(|(i, &s)| (s, starts.get(i + 1).map_or(self.frames, |&n| n) - 1)).collect()
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Rounds to 0.01 px, clips, and rounds again to drop the float noise the
/// corner arithmetic of clipping leaves behind.
fn snap(b: &BBox, dims: FrameDims) -> BBox {
    let r = |b: &BBox| BBox::new(round2(b.x), round2(b.y), round2(b.w), round2(b.h));
    r(&clip_to_frame(&r(b), dims))
}

fn generated_keyframes(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<Keyframe> {
    let (w_max, h_max) = (cfg.dims.width, cfg.dims.height);
    let place = |rng: &mut ChaCha8Rng, h: f64, aspect: f64, near: Option<(Point, f64)>| {
        let w = h * aspect;
        let (xlo, xhi) = (w / 2.0, w_max - w / 2.0);
        let (ylo, yhi) = (h / 2.0, h_max - h / 2.0);
        let c = match near {
            None => Point { x: rng.random_range(xlo..=xhi), y: rng.random_range(ylo..=yhi) },
            Some((p, r)) => {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let d = r * rng.random::<f64>().sqrt();
                Point { x: (p.x + d * a.cos()).clamp(xlo, xhi), y: (p.y + d * a.sin()).clamp(ylo, yhi) }
            }
        };
        BBox::from_center(c, w, h)
    };
    let (hlo, hhi) = cfg.height_range;
    let mut out = Vec::new();
    let mut prev_end: Option<BBox> = None;
    for (s, e) in cfg.runs() {
        let aspect = rng.random_range(cfg.aspect_range.0..=cfg.aspect_range.1);
        // A new camera shows the skier from a new viewpoint: insist on a jump.
        let h = rng.random_range(hlo..=hhi);
        let mut first = place(rng, h, aspect, None);
        for _ in 0..64 {
            if prev_end.is_none_or(|p| iou(&p, &first) < 0.3) {
                break;
            }
            let h = rng.random_range(hlo..=hhi);
            first = place(rng, h, aspect, None);
        }
        out.push(Keyframe { t: s, bbox: first });
        let mut last = first;
        let mut t = s;
        while t < e {
            let next_t = (t + cfg.keyframe_spacing).min(e);
            let h = (last.h * rng.random_range(0.8..1.25)).clamp(hlo, hhi);
            let reach = cfg.max_speed * (next_t - t) as f64;
            last = place(rng, h, aspect, Some((last.center(), reach)));
            out.push(Keyframe { t: next_t, bbox: last });
            t = next_t;
        }
        prev_end = Some(last);
    }
    out
}

fn lerp_box(a: &Keyframe, b: &Keyframe, t: usize) -> BBox {
    if a.t == b.t {
        return a.bbox;
    }
    let f = (t - a.t) as f64 / (b.t - a.t) as f64;
    let l = |x: f64, y: f64| x + (y - x) * f;
    BBox::new(l(a.bbox.x, b.bbox.x), l(a.bbox.y, b.bbox.y), l(a.bbox.w, b.bbox.w), l(a.bbox.h, b.bbox.h))
}

/// Multi-camera ground truth for `cfg`.
///
/// Boxes follow the keyframes piecewise linearly within each camera run and
/// jump at cuts. Frames inside an occlusion keep their interpolated box and
/// are flagged occluded.
pub fn gen_mc_sequence(cfg: &SimConfig) -> Result<MCVideo, SimError> {
    cfg.validate()?;
    let keyframes = if cfg.keyframes.is_empty() {
        generated_keyframes(cfg, &mut rng(cfg.seed, streams::TRAJECTORY))
    } else {
        cfg.keyframes.clone()
    };
    let mut frames = Vec::with_capacity(cfg.frames);
    for (cam, (s, e)) in cfg.runs().into_iter().enumerate() {
        let keys: Vec<&Keyframe> = keyframes.iter().filter(|k| (s..=e).contains(&k.t)).collect();
        if keys.is_empty() {
            return Err(SimError::Config(format!("camera run {s}..={e} has no keyframe")));
        }
        for t in s..=e {
            let b = match keys.iter().position(|k| k.t > t) {
                Some(0) => keys[0].bbox,
                Some(i) => lerp_box(keys[i - 1], keys[i], t),
                None => keys[keys.len() - 1].bbox,
            };
            let b = snap(&b, cfg.dims);
            frames.push(FrameAnnotation { t, bbox: b, visibility: Visibility::Visible, camera_id: cam as u32 + 1 });
        }
    }
    for &(s, len) in &cfg.occlusions {
        for f in &mut frames[s..s + len] {
            f.visibility = Visibility::Occluded;
        }
    }
    let video = MCVideo {
        id: cfg.id.clone(),
        frames,
        meta: VideoMeta::new(cfg.discipline, cfg.fps, cfg.dims),
        manual_attributes: Default::default(),
    };
    video.validate()?;
    Ok(video)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Center jitter standard deviation, pixels.
    pub center_sigma: f64,
    /// Relative size jitter standard deviation.
    pub size_sigma: f64,
    /// Probability of one false positive per frame.
    pub fp_rate: f64,
    /// Probability the target goes undetected on a frame.
    pub miss_rate: f64,
    /// Never detect the target on occluded frames.
    pub miss_occluded: bool,
    /// Score range of target detections.
    pub true_score: (f64, f64),
    /// Score range of false positives.
    pub fp_score: (f64, f64),
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            center_sigma: 2.0,
            size_sigma: 0.03,
            fp_rate: 0.05,
            miss_rate: 0.02,
            miss_occluded: true,
            true_score: (0.7, 1.0),
            fp_score: (0.05, 0.45),
            seed: 0,
        }
    }
}

impl NoiseConfig {
    /// Every frame detected exactly with score 1 and nothing else.
    pub fn noiseless() -> Self {
        Self {
            center_sigma: 0.0,
            size_sigma: 0.0,
            fp_rate: 0.0,
            miss_rate: 0.0,
            miss_occluded: false,
            true_score: (1.0, 1.0),
            fp_score: (0.0, 0.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let band = |(lo, hi): (f64, f64)| unit(lo) && unit(hi) && lo <= hi;
        if !(unit(self.fp_rate) && unit(self.miss_rate)) {
            return Err(SimError::Config("rates must lie in [0, 1]".into()));
        }
        if !(self.center_sigma >= 0.0 && self.size_sigma >= 0.0 && self.center_sigma.is_finite() && self.size_sigma.is_finite()) {
            return Err(SimError::Config("jitter sigmas must be finite and non-negative".into()));
        }
        if !(band(self.true_score) && band(self.fp_score)) {
            return Err(SimError::Config("score bands must be ordered ranges in [0, 1]".into()));
        }
        Ok(())
    }
}

fn in_band(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi { lo } else { rng.random_range(lo..=hi) }
}

fn normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 { 0.0 } else { Normal::new(0.0, sigma).expect("validated sigma").sample(rng) }
}

/// Per-frame detections derived from ground truth.
pub fn gen_detections(video: &MCVideo, noise: &NoiseConfig) -> Result<DetectionStream, SimError> {
    noise.validate()?;
    let mut rng = rng(noise.seed, streams::DETECTIONS);
    let dims = video.dims();
    let mut frames = Vec::with_capacity(video.len());
    for f in &video.frames {
        let mut dets = Vec::new();
        let missed = rng.random_bool(noise.miss_rate);
        let jitter = (normal(&mut rng, noise.center_sigma), normal(&mut rng, noise.center_sigma));
        let scale = (normal(&mut rng, noise.size_sigma), normal(&mut rng, noise.size_sigma));
        let score = in_band(&mut rng, noise.true_score);
        let hidden = noise.miss_occluded && !f.is_visible();
        if !missed && !hidden {
            let w = f.bbox.w * (1.0 + scale.0).max(0.1);
            let h = f.bbox.h * (1.0 + scale.1).max(0.1);
            let b = BBox::new(f.bbox.x + jitter.0 - (w - f.bbox.w) / 2.0, f.bbox.y + jitter.1 - (h - f.bbox.h) / 2.0, w, h);
            let b = snap(&b, dims);
            if b.area() > 0.0 {
                dets.push(Detection { bbox: b, score });
            }
        }
        if rng.random_bool(noise.fp_rate) {
            let h = rng.random_range(30.0..150.0f64).min(dims.height);
            let w = (h * 0.6).min(dims.width);
            let x = rng.random_range(0.0..=dims.width - w);
            let y = rng.random_range(0.0..=dims.height - h);
            let score = in_band(&mut rng, noise.fp_score);
            dets.push(Detection { bbox: snap(&BBox::new(x, y, w, h), dims), score });
        }
        frames.push(dets);
    }
    Ok(DetectionStream::new(frames))
}
