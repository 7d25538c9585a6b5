//! Long-term precision, recall and F-score.
//!
//! Precision averages the overlap over frames reported with confidence at or
//! above a threshold; recall averages the overlap over every scored
//! ground-truth frame regardless of confidence, with unreported frames
//! contributing zero.

use serde::{Deserialize, Serialize};

use super::{MetricsError, PredictionTrace};
use crate::datamodel::FrameAnnotation;
use crate::geometry::iou;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrRe {
    pub precision: f64,
    pub recall: f64,
    /// False when no frame was reported at the threshold; precision is then 0.
    pub precision_defined: bool,
    pub scored_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LTEvalResult {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub fscore: Vec<f64>,
    pub best_f: f64,
    pub best_threshold: f64,
    pub best_precision: f64,
    pub best_recall: f64,
    pub include_occluded: bool,
}

struct ScoredFrame {
    /// IoU when a box was reported.
    overlap: Option<f64>,
    confidence: f64,
}

fn scored_frames(
    trace: &PredictionTrace,
    gts: &[FrameAnnotation],
    include_occluded: bool,
) -> Result<Vec<ScoredFrame>, MetricsError> {
    if trace.len() != gts.len() {
        return Err(MetricsError::LengthMismatch { trace: trace.len(), frames: gts.len() });
    }
    Ok(trace
        .predictions
        .iter()
        .zip(gts)
        .enumerate()
        .filter(|(t, (_, gt))| Some(*t) != trace.init_frame && (include_occluded || gt.is_visible()))
        .map(|(_, (p, gt))| ScoredFrame { overlap: p.bbox.map(|b| iou(&b, &gt.bbox)), confidence: p.confidence })
        .collect())
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r <= 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn pr_re_f(
    trace: &PredictionTrace,
    gts: &[FrameAnnotation],
    threshold: f64,
    include_occluded: bool,
) -> Result<PrRe, MetricsError> {
    let frames = scored_frames(trace, gts, include_occluded)?;
    let mut confident = (0usize, 0.0f64);
    let mut covered = 0.0;
    for f in &frames {
        if let Some(o) = f.overlap {
            covered += o;
            if f.confidence >= threshold {
                confident.0 += 1;
                confident.1 += o;
            }
        }
    }
    let n = frames.len();
    Ok(PrRe {
        precision: if confident.0 > 0 { confident.1 / confident.0 as f64 } else { 0.0 },
        recall: if n > 0 { covered / n as f64 } else { 0.0 },
        precision_defined: confident.0 > 0,
        scored_frames: n,
    })
}

impl PrRe {
    pub fn fscore(&self) -> f64 {
        harmonic(self.precision, self.recall)
    }
}

/// Evaluates F over every distinct confidence in the trace plus 0 and 1 and
/// keeps the best. Ties resolve to the lowest threshold.
pub fn fscore_optimize(
    trace: &PredictionTrace,
    gts: &[FrameAnnotation],
    include_occluded: bool,
) -> Result<LTEvalResult, MetricsError> {
    let frames = scored_frames(trace, gts, include_occluded)?;
    let n = frames.len();

    let mut grid: Vec<f64> = trace.predictions.iter().map(|p| p.confidence).chain([0.0, 1.0]).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    // reported frames by descending confidence with running overlap sums
    let mut reported: Vec<(f64, f64)> = frames.iter().filter_map(|f| f.overlap.map(|o| (f.confidence, o))).collect();
    reported.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut prefix = Vec::with_capacity(reported.len() + 1);
    prefix.push(0.0);
    for &(_, o) in &reported {
        prefix.push(prefix.last().unwrap() + o);
    }
    let recall = if n > 0 { prefix[reported.len()] / n as f64 } else { 0.0 };

    let mut out = LTEvalResult {
        thresholds: Vec::with_capacity(grid.len()),
        precision: Vec::with_capacity(grid.len()),
        recall: Vec::with_capacity(grid.len()),
        fscore: Vec::with_capacity(grid.len()),
        best_f: -1.0,
        best_threshold: 0.0,
        best_precision: 0.0,
        best_recall: 0.0,
        include_occluded,
    };
    for tau in grid {
        let k = reported.partition_point(|&(c, _)| c >= tau);
        let precision = if k > 0 { prefix[k] / k as f64 } else { 0.0 };
        let f = harmonic(precision, recall);
        if f > out.best_f {
            out.best_f = f;
            out.best_threshold = tau;
            out.best_precision = precision;
            out.best_recall = recall;
        }
        out.thresholds.push(tau);
        out.precision.push(precision);
        out.recall.push(recall);
        out.fscore.push(f);
    }
    Ok(out)
}

/// Midpoint-rule integral over `u` in `[0, 1]` of the fraction of `overlaps`
/// at or above `u`. Equals the mean overlap up to `1 / (2 * resolution)`.
pub fn threshold_integral(overlaps: &[f64], resolution: usize) -> f64 {
    if overlaps.is_empty() || resolution == 0 {
        return 0.0;
    }
    let step = 1.0 / resolution as f64;
    let total: usize = (0..resolution)
        .map(|k| {
            let u = (k as f64 + 0.5) * step;
            overlaps.iter().filter(|&&o| o >= u).count()
        })
        .sum();
    total as f64 * step / overlaps.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::Visibility;
    use crate::geometry::BBox;
    use crate::metrics::Prediction;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn gts(boxes: &[BBox]) -> Vec<FrameAnnotation> {
        boxes
            .iter()
            .enumerate()
            .map(|(t, &bbox)| FrameAnnotation { t, bbox, visibility: Visibility::Visible, camera_id: 1 })
            .collect()
    }

    fn four_frame() -> (PredictionTrace, Vec<FrameAnnotation>) {
        let g = BBox::new(0.0, 0.0, 10.0, 10.0);
        let preds = vec![
            Prediction::new(g, 0.9).unwrap(),
            Prediction::new(g, 0.9).unwrap(),
            Prediction::new(BBox::new(5.0, 0.0, 10.0, 10.0), 0.9).unwrap(),
            Prediction::new(BBox::new(100.0, 100.0, 10.0, 10.0), 0.2).unwrap(),
        ];
        (PredictionTrace::new(preds, None), gts(&[g; 4]))
    }

    #[test]
    fn four_frame_example() {
        let (trace, gt) = four_frame();
        let r = pr_re_f(&trace, &gt, 0.5, true).unwrap();
        assert_abs_diff_eq!(r.precision, (2.0 + 1.0 / 3.0) / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.recall, (2.0 + 1.0 / 3.0) / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.fscore(), 2.0 / 3.0, epsilon = 1e-12);
        let low = pr_re_f(&trace, &gt, 0.1, true).unwrap();
        assert_abs_diff_eq!(low.fscore(), 7.0 / 12.0, epsilon = 1e-12);

        let best = fscore_optimize(&trace, &gt, true).unwrap();
        assert_abs_diff_eq!(best.best_f, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(best.best_threshold, 0.9);
        assert_eq!(best.thresholds, vec![0.0, 0.2, 0.9, 1.0]);
        assert_eq!(*best.fscore.last().unwrap(), 0.0);
    }

    #[test]
    fn oracle_scores_one() {
        let boxes: Vec<BBox> = (0..20).map(|i| BBox::new(i as f64, 3.0, 20.0, 40.0)).collect();
        let trace = PredictionTrace::new(boxes.iter().map(|&b| Prediction::new(b, 1.0).unwrap()).collect(), Some(0));
        let gt = gts(&boxes);
        for tau in [0.0, 0.3, 1.0] {
            let r = pr_re_f(&trace, &gt, tau, true).unwrap();
            assert_eq!((r.precision, r.recall), (1.0, 1.0));
        }
        let best = fscore_optimize(&trace, &gt, true).unwrap();
        assert!(best.fscore.iter().all(|&f| f == 1.0));
    }

    #[test]
    fn all_absent() {
        let gt = gts(&[BBox::new(0.0, 0.0, 5.0, 5.0); 5]);
        let r = pr_re_f(&PredictionTrace::all_absent(5), &gt, 0.0, true).unwrap();
        assert_eq!(r.recall, 0.0);
        assert!(!r.precision_defined);
        assert_eq!(fscore_optimize(&PredictionTrace::all_absent(5), &gt, true).unwrap().best_f, 0.0);
    }

    #[test]
    fn init_frame_and_occlusion_are_excluded() {
        let (mut trace, mut gt) = four_frame();
        trace.init_frame = Some(3);
        let r = pr_re_f(&trace, &gt, 0.0, true).unwrap();
        assert_eq!(r.scored_frames, 3);
        assert_abs_diff_eq!(r.recall, (2.0 + 1.0 / 3.0) / 3.0, epsilon = 1e-12);
        trace.init_frame = None;
        gt[2].visibility = Visibility::Occluded;
        let r = pr_re_f(&trace, &gt, 0.5, false).unwrap();
        assert_eq!(r.precision, 1.0);
        assert_abs_diff_eq!(r.recall, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let (trace, gt) = four_frame();
        assert!(matches!(pr_re_f(&trace, &gt[..3], 0.5, true), Err(MetricsError::LengthMismatch { .. })));
    }

    fn arb_trace() -> impl Strategy<Value = (PredictionTrace, Vec<FrameAnnotation>)> {
        let frame = (0.0..50.0f64, 0.0..50.0f64, 1.0..30.0f64, 1.0..30.0f64, -10.0..10.0f64, any::<bool>(), 0.0..=1.0f64);
        prop::collection::vec(frame, 1..60).prop_map(|rows| {
            let mut preds = Vec::new();
            let mut boxes = Vec::new();
            for (x, y, w, h, d, present, c) in rows {
                let g = BBox::new(x, y, w, h);
                boxes.push(g);
                preds.push(if present {
                    Prediction::new(g.translate(d, d / 2.0), (c * 10.0).round() / 10.0).unwrap()
                } else {
                    Prediction::absent()
                });
            }
            (PredictionTrace::new(preds, None), gts(&boxes))
        })
    }

    proptest! {
        #[test]
        fn optimum_dominates_grid_and_matches_direct((trace, gt) in arb_trace()) {
            let best = fscore_optimize(&trace, &gt, true).unwrap();
            for (i, &tau) in best.thresholds.iter().enumerate() {
                prop_assert!(best.best_f >= best.fscore[i]);
                let direct = pr_re_f(&trace, &gt, tau, true).unwrap();
                prop_assert!((direct.fscore() - best.fscore[i]).abs() < 1e-9);
                if direct.precision == 0.0 && direct.recall == 0.0 {
                    prop_assert_eq!(best.fscore[i], 0.0);
                }
            }
        }

        #[test]
        fn zero_threshold_precision_is_mean_iou((trace, gt) in arb_trace()) {
            let present: Vec<f64> = trace.predictions.iter().zip(&gt)
                .filter_map(|(p, g)| p.bbox.map(|b| iou(&b, &g.bbox))).collect();
            prop_assume!(!present.is_empty());
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            let r = pr_re_f(&trace, &gt, 0.0, true).unwrap();
            prop_assert!((r.precision - mean).abs() < 1e-12);
            prop_assert!((threshold_integral(&present, 1000) - mean).abs() <= 1e-3);
        }
    }
}
