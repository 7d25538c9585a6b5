use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DataError;
use crate::geometry::BBox;

pub const HEAD: &str = "head";
pub const NECK: &str = "neck";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub present: bool,
}

/// Named 2D joints of one person in one frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KeypointPose {
    pub joints: BTreeMap<String, Keypoint>,
}

impl KeypointPose {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, x: f64, y: f64) -> Self {
        self.joints.insert(name.to_string(), Keypoint { x, y, present: true });
        self
    }

    pub fn get(&self, name: &str) -> Option<&Keypoint> {
        self.joints.get(name).filter(|k| k.present)
    }

    pub fn present(&self) -> impl Iterator<Item = (&str, &Keypoint)> {
        self.joints.iter().filter(|(_, k)| k.present).map(|(n, k)| (n.as_str(), k))
    }

    pub fn map_points(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let joints = self
            .joints
            .iter()
            .map(|(n, k)| {
                let (x, y) = f(k.x, k.y);
                (n.clone(), Keypoint { x, y, present: k.present })
            })
            .collect();
        Self { joints }
    }
}

/// Tight box around the present keypoints, each side grown by
/// `padding_fraction / 2` of the corresponding dimension.
pub fn keypoints_to_box(pose: &KeypointPose, padding_fraction: f64) -> Result<BBox, DataError> {
    let mut pts = pose.present().map(|(_, k)| (k.x, k.y));
    let (x0, y0) = pts.next().ok_or(DataError::NoKeypoints)?;
    let (mut x1, mut y1, mut x2, mut y2) = (x0, y0, x0, y0);
    for (x, y) in pts {
        x1 = x1.min(x);
        y1 = y1.min(y);
        x2 = x2.max(x);
        y2 = y2.max(y);
    }
    let (w, h) = (x2 - x1, y2 - y1);
    let (px, py) = (w * padding_fraction / 2.0, h * padding_fraction / 2.0);
    Ok(BBox::new(x1 - px, y1 - py, w + 2.0 * px, h + 2.0 * py))
}

/// Parses `frame,joint_name,x,y,present` rows into per-frame poses. A header
/// row starting with `frame` is skipped; `present` accepts `1/0/true/false`.
pub fn parse_keypoints(input: &str) -> Result<BTreeMap<usize, KeypointPose>, DataError> {
    let mut out: BTreeMap<usize, KeypointPose> = BTreeMap::new();
    for (i, line) in input.lines().enumerate() {
        let ln = i + 1;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("frame")) {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 {
            return Err(DataError::syntax(ln, "row", format!("expected 5 columns, found {}", cols.len())));
        }
        let frame = cols[0].parse::<usize>().map_err(|e| DataError::syntax(ln, "frame", e.to_string()))?;
        let x = cols[2].parse::<f64>().map_err(|e| DataError::syntax(ln, "x", e.to_string()))?;
        let y = cols[3].parse::<f64>().map_err(|e| DataError::syntax(ln, "y", e.to_string()))?;
        let present = match cols[4].to_ascii_lowercase().as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(DataError::syntax(ln, "present", format!("expected 0/1, found {other:?}"))),
        };
        if present && !(x.is_finite() && y.is_finite()) {
            return Err(DataError::syntax(ln, "x", "present keypoints must be finite"));
        }
        out.entry(frame).or_default().joints.insert(cols[1].to_string(), Keypoint { x, y, present });
    }
    Ok(out)
}
