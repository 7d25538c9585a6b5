use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::datamodel::{keypoints_to_box, KeypointPose, HEAD, NECK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalizer {
    /// Diagonal of the tight box around the ground-truth keypoints.
    GtBoxDiagonal,
    Custom(f64),
}

/// Fraction of present ground-truth keypoints predicted closer than half the
/// ground-truth head-neck distance. Missing predictions count as misses.
pub fn pck(pred: &KeypointPose, gt: &KeypointPose) -> Result<f64, MetricsError> {
    let head = gt.get(HEAD).ok_or(MetricsError::MissingJoint(HEAD))?;
    let neck = gt.get(NECK).ok_or(MetricsError::MissingJoint(NECK))?;
    let threshold = 0.5 * (head.x - neck.x).hypot(head.y - neck.y);
    let (mut hits, mut total) = (0usize, 0usize);
    for (name, g) in gt.present() {
        total += 1;
        if let Some(p) = pred.get(name) {
            if (p.x - g.x).hypot(p.y - g.y) < threshold {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Mean per-joint position error over joints present in both poses, divided
/// by the normalizer.
pub fn mpjpe(pred: &KeypointPose, gt: &KeypointPose, normalizer: Normalizer) -> Result<f64, MetricsError> {
    let scale = match normalizer {
        Normalizer::Custom(v) => v,
        Normalizer::GtBoxDiagonal => keypoints_to_box(gt, 0.0).map_err(|_| MetricsError::NoMatchedJoints)?.diagonal(),
    };
    if !(scale.is_finite() && scale > 0.0) {
        return Err(MetricsError::Normalizer(scale));
    }
    let errors: Vec<f64> = gt
        .present()
        .filter_map(|(name, g)| pred.get(name).map(|p| (p.x - g.x).hypot(p.y - g.y)))
        .collect();
    if errors.is_empty() {
        return Err(MetricsError::NoMatchedJoints);
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64 / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gt_pose() -> KeypointPose {
        // head-neck distance 20
        KeypointPose::new().with(HEAD, 50.0, 10.0).with(NECK, 50.0, 30.0).with("hip", 50.0, 80.0)
    }

    #[test]
    fn pck_half_head_neck() {
        let pred = KeypointPose::new().with(HEAD, 55.0, 10.0).with(NECK, 50.0, 39.0).with("hip", 65.0, 80.0);
        assert!((pck(&pred, &gt_pose()).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(pck(&gt_pose(), &gt_pose()).unwrap(), 1.0);
        let far = gt_pose().map_points(|x, y| (x + 1e9, y));
        assert_eq!(pck(&far, &gt_pose()).unwrap(), 0.0);
    }

    #[test]
    fn pck_requires_head_and_neck() {
        let gt = KeypointPose::new().with(HEAD, 0.0, 0.0);
        assert_eq!(pck(&gt, &gt), Err(MetricsError::MissingJoint(NECK)));
    }

    #[test]
    fn mpjpe_examples() {
        let gt = KeypointPose::new().with("a", 0.0, 0.0).with("b", 100.0, 0.0);
        let pred = KeypointPose::new().with("a", 3.0, 4.0).with("b", 100.0, 15.0);
        assert!((mpjpe(&pred, &gt, Normalizer::Custom(100.0)).unwrap() - 0.10).abs() < 1e-12);
        assert_eq!(mpjpe(&gt, &gt, Normalizer::GtBoxDiagonal).unwrap(), 0.0);
        let one = KeypointPose::new().with("a", 0.0, 0.0);
        let moved = KeypointPose::new().with("a", 3.0, 4.0);
        assert!((mpjpe(&moved, &one, Normalizer::Custom(100.0)).unwrap() - 0.05).abs() < 1e-12);
        assert_eq!(mpjpe(&moved, &one, Normalizer::Custom(0.0)), Err(MetricsError::Normalizer(0.0)));
        // single-joint ground truth has a zero diagonal
        assert!(mpjpe(&moved, &one, Normalizer::GtBoxDiagonal).is_err());
    }

    proptest! {
        #[test]
        fn translation_and_scale_invariance(
            pts in prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64, -5.0..5.0f64, -5.0..5.0f64), 3..10),
            dx in -500.0..500.0f64, dy in -500.0..500.0f64, s in 0.1..10.0f64,
        ) {
            let mut gt = KeypointPose::new().with(HEAD, 0.0, 0.0).with(NECK, 0.0, 20.0);
            let mut pred = KeypointPose::new().with(HEAD, 1.0, 1.0).with(NECK, 0.0, 25.0);
            for (i, (x, y, ex, ey)) in pts.into_iter().enumerate() {
                let name = format!("j{i}");
                gt = gt.with(&name, x, y);
                pred = pred.with(&name, x + ex, y + ey);
            }
            let shift = |p: &KeypointPose| p.map_points(|x, y| (x + dx, y + dy));
            prop_assert_eq!(pck(&pred, &gt).unwrap(), pck(&shift(&pred), &shift(&gt)).unwrap());
            let base = mpjpe(&pred, &gt, Normalizer::GtBoxDiagonal).unwrap();
            let moved = mpjpe(&shift(&pred), &shift(&gt), Normalizer::GtBoxDiagonal).unwrap();
            prop_assert!((base - moved).abs() < 1e-9);
            let scale = |p: &KeypointPose| p.map_points(|x, y| (x * s, y * s));
            let scaled = mpjpe(&scale(&pred), &scale(&gt), Normalizer::GtBoxDiagonal).unwrap();
            prop_assert!((base - scaled).abs() < 1e-9);
        }
    }
}
