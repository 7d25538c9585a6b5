//! Multi-camera video annotations, single-camera clips, visual attributes,
//! keypoints and training/test splits.

mod annotation;
mod attributes;
mod keypoints;
mod splits;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, FrameDims, GeometryError};

pub use annotation::{parse_annotations, serialize_annotations};
pub use attributes::{compute_auto_attributes, AutoAttributes, LOW_RESOLUTION_AREA, RATIO_RANGE};
pub use keypoints::{keypoints_to_box, parse_keypoints, Keypoint, KeypointPose, HEAD, NECK};
pub use splits::{generate_splits, split_stats, Split, SplitCondition, SplitStats};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {field}: {message}")]
    Syntax { line: usize, field: String, message: String },
    #[error("invalid video {video}: {message}")]
    Invariant { video: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("clip has no frames")]
    EmptyClip,
    #[error("first box of the clip has zero area; scale and aspect changes are undefined")]
    DegenerateFirstBox,
    #[error("video {video} has no {condition} metadata")]
    MissingCondition { video: String, condition: SplitCondition },
    #[error("at least two videos are needed to split, got {0}")]
    TooFewVideos(usize),
    #[error("pose has no present keypoints")]
    NoKeypoints,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DataError {
    pub(crate) fn syntax(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        DataError::Syntax { line, field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    Visible,
    Occluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Discipline {
    /// Alpine skiing.
    AL,
    /// Ski jumping.
    JP,
    /// Freestyle skiing.
    FS,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Weather {
    Sunny,
    Cloudy,
    Harsh,
}

impl fmt::Display for Discipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Discipline::AL => "AL",
            Discipline::JP => "JP",
            Discipline::FS => "FS",
        })
    }
}

impl FromStr for Discipline {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AL" => Ok(Discipline::AL),
            "JP" => Ok(Discipline::JP),
            "FS" => Ok(Discipline::FS),
            other => Err(format!("unknown discipline {other:?}, expected AL, JP or FS")),
        }
    }
}

impl fmt::Display for Weather {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weather::Sunny => "sunny",
            Weather::Cloudy => "cloudy",
            Weather::Harsh => "harsh",
        })
    }
}

impl FromStr for Weather {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sunny" => Ok(Weather::Sunny),
            "cloudy" => Ok(Weather::Cloudy),
            "harsh" => Ok(Weather::Harsh),
            other => Err(format!("unknown weather {other:?}, expected sunny, cloudy or harsh")),
        }
    }
}

/// Per-frame ground truth. Occluded frames still carry the estimated box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotation {
    pub t: usize,
    pub bbox: BBox,
    pub visibility: Visibility,
    pub camera_id: u32,
}

impl FrameAnnotation {
    pub fn is_visible(&self) -> bool {
        self.visibility == Visibility::Visible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub discipline: Discipline,
    pub sub_discipline: Option<String>,
    pub weather: Option<Weather>,
    pub athlete_id: Option<String>,
    pub athlete_nationality: Option<String>,
    pub location: Option<String>,
    pub country: Option<String>,
    pub date: Option<NaiveDate>,
    pub fps: f64,
    pub resolution: FrameDims,
    pub performance_params: BTreeMap<String, String>,
}

impl VideoMeta {
    pub fn new(discipline: Discipline, fps: f64, resolution: FrameDims) -> Self {
        Self {
            discipline,
            sub_discipline: None,
            weather: None,
            athlete_id: None,
            athlete_nationality: None,
            location: None,
            country: None,
            date: None,
            fps,
            resolution,
            performance_params: BTreeMap::new(),
        }
    }
}

/// Visual variability attributes of a single-camera clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attribute {
    /// Camera motion.
    CM,
    /// Scale change.
    SC,
    /// Background clutter.
    BC,
    /// Aspect ratio change.
    ARC,
    /// Illumination variation.
    IV,
    /// Partial occlusion.
    POC,
    /// Motion blur.
    MB,
    /// Fast motion.
    FM,
    /// Full occlusion.
    FOC,
    /// Low resolution.
    LR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Automatic,
    Manual,
}

impl Attribute {
    pub const ALL: [Attribute; 10] = [
        Attribute::CM,
        Attribute::SC,
        Attribute::BC,
        Attribute::ARC,
        Attribute::IV,
        Attribute::POC,
        Attribute::MB,
        Attribute::FM,
        Attribute::FOC,
        Attribute::LR,
    ];

    pub fn provenance(self) -> Provenance {
        match self {
            Attribute::SC | Attribute::ARC | Attribute::FM | Attribute::LR => Provenance::Automatic,
            _ => Provenance::Manual,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Attribute::CM => "CM",
            Attribute::SC => "SC",
            Attribute::BC => "BC",
            Attribute::ARC => "ARC",
            Attribute::IV => "IV",
            Attribute::POC => "POC",
            Attribute::MB => "MB",
            Attribute::FM => "FM",
            Attribute::FOC => "FOC",
            Attribute::LR => "LR",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Attribute {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Attribute::ALL
            .into_iter()
            .find(|a| a.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown attribute {s:?}"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    flags: BTreeSet<Attribute>,
}

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, attr: Attribute, on: bool) {
        if on {
            self.flags.insert(attr);
        } else {
            self.flags.remove(&attr);
        }
    }

    pub fn has(&self, attr: Attribute) -> bool {
        self.flags.contains(&attr)
    }

    pub fn iter(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.flags.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Sets only the manually labelled flags from `manual`, ignoring any
    /// automatic attribute it may contain.
    pub fn merge_manual<'a>(&mut self, manual: impl IntoIterator<Item = &'a Attribute>) {
        for &a in manual {
            if a.provenance() == Provenance::Manual {
                self.flags.insert(a);
            }
        }
    }

    pub fn merge_auto(&mut self, auto: &AutoAttributes) {
        self.set(Attribute::SC, auto.scale_change);
        self.set(Attribute::ARC, auto.aspect_ratio_change);
        self.set(Attribute::FM, auto.fast_motion);
        self.set(Attribute::LR, auto.low_resolution);
    }
}

/// A multi-camera video: one athlete's full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCVideo {
    pub id: String,
    pub frames: Vec<FrameAnnotation>,
    pub meta: VideoMeta,
    /// Manual clip attributes keyed by the clip's first frame index.
    pub manual_attributes: BTreeMap<usize, BTreeSet<Attribute>>,
}

impl MCVideo {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> FrameDims {
        self.meta.resolution
    }

    pub fn boxes(&self) -> impl Iterator<Item = BBox> + '_ {
        self.frames.iter().map(|f| f.bbox)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |message: String| DataError::Invariant { video: self.id.clone(), message };
        if self.id.trim().is_empty() {
            return Err(bad("empty id".into()));
        }
        if self.frames.is_empty() {
            return Err(bad("no frames".into()));
        }
        if !(self.meta.fps.is_finite() && self.meta.fps > 0.0) {
            return Err(bad(format!("fps must be positive, got {}", self.meta.fps)));
        }
        FrameDims::new(self.meta.resolution.width, self.meta.resolution.height)?;
        for (i, f) in self.frames.iter().enumerate() {
            if f.t != i {
                return Err(bad(format!("frame indices must be contiguous from 0: expected {i}, found {}", f.t)));
            }
            if f.camera_id == 0 {
                return Err(bad(format!("frame {i}: camera id must be >= 1")));
            }
            f.bbox.validate()?;
        }
        Ok(())
    }
}

/// A maximal run of frames captured by one camera, `end` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SCClip {
    pub video_id: String,
    pub camera_id: u32,
    pub start: usize,
    pub end: usize,
    pub attributes: AttributeSet,
}

impl SCClip {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frames<'a>(&self, video: &'a MCVideo) -> &'a [FrameAnnotation] {
        &video.frames[self.start..=self.end]
    }
}

/// Run-length segmentation of a video by camera id. Clip attributes hold
/// only the manual labels; see [`label_clips`] for the automatic ones.
pub fn segment_clips(video: &MCVideo) -> Vec<SCClip> {
    let mut clips: Vec<SCClip> = Vec::new();
    for f in &video.frames {
        match clips.last_mut() {
            Some(c) if c.camera_id == f.camera_id => c.end = f.t,
            _ => clips.push(SCClip {
                video_id: video.id.clone(),
                camera_id: f.camera_id,
                start: f.t,
                end: f.t,
                attributes: AttributeSet::new(),
            }),
        }
    }
    for c in &mut clips {
        if let Some(manual) = video.manual_attributes.get(&c.start) {
            c.attributes.merge_manual(manual);
        }
    }
    clips
}

/// [`segment_clips`] plus the rule-based attributes of every clip.
pub fn label_clips(video: &MCVideo) -> Result<Vec<SCClip>, DataError> {
    let mut clips = segment_clips(video);
    for c in &mut clips {
        let auto = compute_auto_attributes(c.frames(video))?;
        c.attributes.merge_auto(&auto);
    }
    Ok(clips)
}
