use serde::{Deserialize, Serialize};

use super::{DataError, FrameAnnotation};

/// Scale and aspect ratio relative to the first frame must stay inside this
/// closed range.
pub const RATIO_RANGE: (f64, f64) = (0.5, 2.0);
/// A box smaller than this many square pixels marks the clip low resolution.
pub const LOW_RESOLUTION_AREA: f64 = 1000.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoAttributes {
    pub scale_change: bool,
    pub aspect_ratio_change: bool,
    pub fast_motion: bool,
    pub low_resolution: bool,
}

fn outside_range(ratio: f64) -> bool {
    !(RATIO_RANGE.0..=RATIO_RANGE.1).contains(&ratio)
}

/// Rule-based attributes of one single-camera clip. Scale and aspect ratio
/// are anchored to the clip's first box; motion compares consecutive boxes.
pub fn compute_auto_attributes(frames: &[FrameAnnotation]) -> Result<AutoAttributes, DataError> {
    let first = frames.first().ok_or(DataError::EmptyClip)?.bbox;
    let first_area = first.area();
    if first_area <= 0.0 {
        return Err(DataError::DegenerateFirstBox);
    }
    let first_aspect = first.w / first.h;

    let mut out = AutoAttributes::default();
    for f in frames {
        let b = f.bbox;
        // division by a zero area or height yields inf, which falls outside the range
        out.scale_change |= outside_range(first_area / b.area());
        out.aspect_ratio_change |= outside_range(first_aspect / (b.w / b.h));
        out.low_resolution |= b.area() < LOW_RESOLUTION_AREA;
    }
    out.fast_motion = frames.windows(2).any(|pair| {
        let (prev, next) = (pair[0].bbox, pair[1].bbox);
        let (a, b) = (prev.center(), next.center());
        (b.x - a.x).hypot(b.y - a.y) > prev.area().sqrt()
    });
    Ok(out)
}
