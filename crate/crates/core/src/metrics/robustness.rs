use serde::{Deserialize, Serialize};

use super::{MetricsError, PredictionTrace};
use crate::datamodel::FrameAnnotation;
use crate::geometry::iou;

/// Recovery windows in frames: 1 frame up to 3 s at 30 fps.
pub const GSR_WINDOWS: [usize; 7] = [1, 7, 15, 22, 30, 60, 90];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsrOptions {
    /// A frame is wrong when its overlap is below this value.
    pub iou_threshold: f64,
    /// When false, occluded frames can never be wrong.
    pub include_occluded: bool,
}

impl Default for GsrOptions {
    fn default() -> Self {
        Self { iou_threshold: 0.5, include_occluded: true }
    }
}

/// Generalized success robustness with a recovery window.
///
/// The sequence fails at the start of the first maximal run of wrong frames
/// longer than `window`; the score is that index over the sequence length, or
/// 1 when no run is long enough. The initialization frame is never wrong.
pub fn gsr(
    trace: &PredictionTrace,
    gts: &[FrameAnnotation],
    window: usize,
    opts: &GsrOptions,
) -> Result<f64, MetricsError> {
    if window == 0 {
        return Err(MetricsError::ZeroWindow);
    }
    let wrong = wrong_frames(trace, gts, opts)?;
    Ok(failure_index(&wrong, window).map_or(1.0, |i| i as f64 / wrong.len() as f64))
}

/// [`gsr`] at every window of [`GSR_WINDOWS`].
pub fn gsr_curve(trace: &PredictionTrace, gts: &[FrameAnnotation], opts: &GsrOptions) -> Result<Vec<f64>, MetricsError> {
    let wrong = wrong_frames(trace, gts, opts)?;
    Ok(GSR_WINDOWS
        .iter()
        .map(|&w| failure_index(&wrong, w).map_or(1.0, |i| i as f64 / wrong.len() as f64))
        .collect())
}

fn wrong_frames(trace: &PredictionTrace, gts: &[FrameAnnotation], opts: &GsrOptions) -> Result<Vec<bool>, MetricsError> {
    if trace.len() != gts.len() {
        return Err(MetricsError::LengthMismatch { trace: trace.len(), frames: gts.len() });
    }
    Ok(trace
        .predictions
        .iter()
        .zip(gts)
        .enumerate()
        .map(|(t, (p, gt))| {
            if Some(t) == trace.init_frame || (!opts.include_occluded && !gt.is_visible()) {
                return false;
            }
            p.bbox.map_or(0.0, |b| iou(&b, &gt.bbox)) < opts.iou_threshold
        })
        .collect())
}

fn failure_index(wrong: &[bool], window: usize) -> Option<usize> {
    let mut t = 0;
    while t < wrong.len() {
        if wrong[t] {
            let start = t;
            while t < wrong.len() && wrong[t] {
                t += 1;
            }
            if t - start > window {
                return Some(start);
            }
        } else {
            t += 1;
        }
    }
    None
}
