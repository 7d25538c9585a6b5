//! Tracking by detection: Kalman-filtered tracks associated to detections by
//! IoU-cost assignment, and a backend that follows the track seeded by the
//! initialization box.

mod backend;
mod hungarian;
mod kalman;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{iou, BBox};

pub use backend::SortBackend;
pub use hungarian::{hungarian, Assignment};
pub use kalman::{box_to_measurement, state_to_box, Covariance, KalmanParams, KalmanTrack, State};

#[derive(Debug, Error, PartialEq)]
pub enum SortError {
    #[error("measurement {0:?} has no positive area")]
    DegenerateMeasurement(BBox),
    #[error("innovation covariance is singular")]
    Singular,
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SortConfig {
    /// Matches below this IoU are discarded.
    pub iou_gate: f64,
    /// Frames a track may go unmatched before deletion.
    pub max_age: u32,
    /// Hits before a track is reported.
    pub min_hits: u32,
    /// Detections scored below this are ignored.
    pub min_score: f64,
    pub kalman: KalmanParams,
}

impl Default for SortConfig {
    fn default() -> Self {
        Self { iou_gate: 0.3, max_age: 1, min_hits: 3, min_score: 0.0, kalman: KalmanParams::default() }
    }
}

impl SortConfig {
    pub fn validate(&self) -> Result<(), SortError> {
        if !(0.0..=1.0).contains(&self.iou_gate) {
            return Err(SortError::Config(format!("iou_gate {} outside [0, 1]", self.iou_gate)));
        }
        if !(0.0..=1.0).contains(&self.min_score) {
            return Err(SortError::Config(format!("min_score {} outside [0, 1]", self.min_score)));
        }
        self.kalman.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackOutput {
    pub id: u64,
    pub bbox: BBox,
}

/// Associates `detections` with already predicted `tracks`, corrects matched
/// tracks, spawns tracks for unmatched detections and drops stale ones.
/// Returns the tracks reported on this frame.
pub fn sort_step(
    tracks: &mut Vec<KalmanTrack>,
    detections: &[BBox],
    cfg: &SortConfig,
    next_id: &mut u64,
) -> Result<Vec<TrackOutput>, SortError> {
    let predicted: Vec<BBox> = tracks.iter().map(KalmanTrack::bbox).collect();
    let cost: Vec<Vec<f64>> = predicted.iter().map(|p| detections.iter().map(|d| 1.0 - iou(p, d)).collect()).collect();
    let assignment = hungarian(&cost);

    let mut det_matched = vec![false; detections.len()];
    for &(ti, di) in &assignment.pairs {
        if iou(&predicted[ti], &detections[di]) < cfg.iou_gate {
            continue;
        }
        tracks[ti].update(&detections[di], &cfg.kalman)?;
        det_matched[di] = true;
    }
    for (di, d) in detections.iter().enumerate() {
        if !det_matched[di] {
            tracks.push(KalmanTrack::new(*next_id, d, &cfg.kalman)?);
            *next_id += 1;
        }
    }

    let outputs = tracks
        .iter()
        .filter(|t| t.time_since_update == 0 && (t.hits >= cfg.min_hits || t.age < cfg.min_hits))
        .map(|t| TrackOutput { id: t.id, bbox: t.bbox() })
        .collect();
    tracks.retain(|t| t.time_since_update <= cfg.max_age);
    Ok(outputs)
}

/// A running multi-target tracker.
#[derive(Debug, Clone)]
pub struct Sort {
    pub config: SortConfig,
    pub tracks: Vec<KalmanTrack>,
    next_id: u64,
}

impl Sort {
    pub fn new(config: SortConfig) -> Result<Self, SortError> {
        config.validate()?;
        Ok(Self { config, tracks: Vec::new(), next_id: 0 })
    }

    /// Adds a track from a box and returns its id.
    pub fn spawn(&mut self, bbox: &BBox, hits: u32) -> Result<u64, SortError> {
        let mut t = KalmanTrack::new(self.next_id, bbox, &self.config.kalman)?;
        t.hits = hits;
        t.hit_streak = hits;
        self.tracks.push(t);
        self.next_id += 1;
        Ok(self.next_id - 1)
    }

    /// Predicts every track `dt` frames ahead, then runs [`sort_step`].
    pub fn step(&mut self, detections: &[BBox], dt: f64) -> Result<Vec<TrackOutput>, SortError> {
        for t in &mut self.tracks {
            t.predict(dt, &self.config.kalman);
        }
        self.tracks.retain(|t| t.mean.iter().all(|x| x.is_finite()));
        sort_step(&mut self.tracks, detections, &self.config, &mut self.next_id)
    }

    pub fn track(&self, id: u64) -> Option<&KalmanTrack> {
        self.tracks.iter().find(|t| t.id == id)
    }
}
