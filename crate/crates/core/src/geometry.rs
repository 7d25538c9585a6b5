//! Axis-aligned bounding-box arithmetic.
//!
//! Boxes use the top-left corner convention `[x, y, w, h]` in real-valued
//! pixel coordinates throughout the crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid box [{x}, {y}, {w}, {h}]: sizes must be finite and non-negative")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },
    #[error("invalid frame dimensions {width}x{height}")]
    InvalidDims { width: f64, height: f64 },
    #[error("search region of side {side} does not fit a {width}x{height} frame horizontally")]
    EmptyClip { side: f64, width: f64, height: f64 },
    #[error("search area factor must be positive, got {0}")]
    InvalidFactor(f64),
}

/// Axis-aligned rectangle, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

/// Frame width and height in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameDims {
    pub width: f64,
    pub height: f64,
}

impl FrameDims {
    pub fn new(width: f64, height: f64) -> Result<Self, GeometryError> {
        if !(width.is_finite() && height.is_finite() && width > 0.0 && height > 0.0) {
            return Err(GeometryError::InvalidDims { width, height });
        }
        Ok(Self { width, height })
    }
}

impl BBox {
    /// Unchecked constructor; see [`BBox::try_new`] for validation.
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn try_new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite();
        if !finite || self.w < 0.0 || self.h < 0.0 {
            return Err(GeometryError::InvalidBox { x: self.x, y: self.y, w: self.w, h: self.h });
        }
        Ok(())
    }

    pub fn from_corners(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x: x1, y: y1, w: (x2 - x1).max(0.0), h: (y2 - y1).max(0.0) }
    }

    pub fn from_center(c: Point, w: f64, h: f64) -> Self {
        Self { x: c.x - w / 2.0, y: c.y - h / 2.0, w, h }
    }

    pub fn center(&self) -> Point {
        Point { x: self.x + self.w / 2.0, y: self.y + self.h / 2.0 }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Width over height; `None` for zero height.
    pub fn aspect_ratio(&self) -> Option<f64> {
        (self.h > 0.0).then(|| self.w / self.h)
    }

    pub fn diagonal(&self) -> f64 {
        self.w.hypot(self.h)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self { x: self.x + dx, y: self.y + dy, ..*self }
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = overlap(self.x, self.w, other.x, other.w);
        let ih = overlap(self.y, self.h, other.y, other.h);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        iou(self, other)
    }
}

/// Length shared by two intervals. Equal starts skip the corner arithmetic
/// so that identical boxes overlap exactly.
fn overlap(a: f64, la: f64, b: f64, lb: f64) -> f64 {
    if a == b {
        la.min(lb)
    } else {
        (a + la).min(b + lb) - a.max(b)
    }
}

/// Intersection over union. Two boxes whose union has zero area score 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Intersects `b` with `[0, W] x [0, H]`. A box fully outside collapses to
/// zero area on the nearest frame edge.
pub fn clip_to_frame(b: &BBox, dims: FrameDims) -> BBox {
    let x1 = b.x.clamp(0.0, dims.width);
    let y1 = b.y.clamp(0.0, dims.height);
    let x2 = b.right().clamp(0.0, dims.width);
    let y2 = b.bottom().clamp(0.0, dims.height);
    BBox::from_corners(x1, y1, x2.max(x1), y2.max(y1))
}

/// Reference box handed to a wide-search re-detector after a confident frame.
///
/// The box is square with side `S = H / factor`, so the search region the
/// re-detector derives from it (side `factor * S`) spans the full frame
/// height. Its center is `(clip(c_x, H/2, W - H/2), H/2)` where `c_x` is the
/// center-x of `prev_confident`, keeping that region inside the frame.
pub fn relocalization_reference(
    prev_confident: &BBox,
    dims: FrameDims,
    factor: f64,
) -> Result<BBox, GeometryError> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(GeometryError::InvalidFactor(factor));
    }
    let (w, h) = (dims.width, dims.height);
    let side = h / factor;
    let lo = h / 2.0;
    let hi = w - h / 2.0;
    if hi < lo {
        return Err(GeometryError::EmptyClip { side: h, width: w, height: h });
    }
    let cx = prev_confident.center().x.clamp(lo, hi);
    Ok(BBox::from_center(Point { x: cx, y: h / 2.0 }, side, side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hd() -> FrameDims {
        FrameDims::new(1280.0, 720.0).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(20.0, 20.0, 5.0, 5.0)), 0.0);
        assert_abs_diff_eq!(iou(&a, &BBox::new(5.0, 0.0, 10.0, 10.0)), 50.0 / 150.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_degenerate_is_zero() {
        let p = BBox::new(3.0, 3.0, 0.0, 0.0);
        assert_eq!(iou(&p, &p), 0.0);
        assert_eq!(iou(&p, &BBox::new(0.0, 0.0, 10.0, 10.0)), 0.0);
    }

    #[test]
    fn center_round_trip() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(b.center(), Point { x: 5.0, y: 5.0 });
        assert_eq!(BBox::from_center(Point { x: 5.0, y: 5.0 }, 10.0, 10.0), b);
        assert_eq!(BBox::new(980.0, 400.0, 40.0, 60.0).center(), Point { x: 1000.0, y: 430.0 });
    }

    #[test]
    fn relocalization_clips_right_edge() {
        let r = relocalization_reference(&BBox::new(980.0, 400.0, 40.0, 60.0), hd(), 5.0).unwrap();
        assert_eq!(r, BBox::new(848.0, 288.0, 144.0, 144.0));
    }

    #[test]
    fn relocalization_clips_left_edge() {
        let prev = BBox::from_center(Point { x: 100.0, y: 50.0 }, 20.0, 20.0);
        let r = relocalization_reference(&prev, hd(), 5.0).unwrap();
        assert_eq!(r, BBox::new(288.0, 288.0, 144.0, 144.0));
    }

    #[test]
    fn relocalization_square_frame_degenerates() {
        let dims = FrameDims::new(720.0, 720.0).unwrap();
        for cx in [0.0, 100.0, 360.0, 700.0] {
            let prev = BBox::from_center(Point { x: cx, y: 10.0 }, 4.0, 4.0);
            let r = relocalization_reference(&prev, dims, 5.0).unwrap();
            assert_eq!(r.center().x, 360.0);
        }
    }

    #[test]
    fn relocalization_portrait_frame_errors() {
        let dims = FrameDims::new(480.0, 720.0).unwrap();
        let err = relocalization_reference(&BBox::new(0.0, 0.0, 1.0, 1.0), dims, 5.0).unwrap_err();
        assert!(matches!(err, GeometryError::EmptyClip { .. }));
        assert!(relocalization_reference(&BBox::default(), hd(), 0.0).is_err());
    }

    #[test]
    fn clip_examples() {
        let d = FrameDims::new(100.0, 100.0).unwrap();
        assert_eq!(clip_to_frame(&BBox::new(-5.0, -5.0, 10.0, 10.0), d), BBox::new(0.0, 0.0, 5.0, 5.0));
        assert_eq!(clip_to_frame(&BBox::new(10.0, 10.0, 5.0, 5.0), d), BBox::new(10.0, 10.0, 5.0, 5.0));
        assert_eq!(clip_to_frame(&BBox::new(95.0, 95.0, 10.0, 10.0), d), BBox::new(95.0, 95.0, 5.0, 5.0));
        assert_eq!(clip_to_frame(&BBox::new(200.0, 10.0, 5.0, 5.0), d).area(), 0.0);
    }

    #[test]
    fn validation() {
        assert!(BBox::try_new(0.0, 0.0, -1.0, 1.0).is_err());
        assert!(BBox::try_new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(FrameDims::new(0.0, 10.0).is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-500.0..500.0f64, -500.0..500.0f64, 0.0..300.0f64, 0.0..300.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_self_is_one(a in arb_box()) {
            prop_assume!(a.area() > 1e-6);
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn iou_translation_invariant(a in arb_box(), b in arb_box(), dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
            let moved = iou(&a.translate(dx, dy), &b.translate(dx, dy));
            prop_assert!((moved - iou(&a, &b)).abs() < 1e-9);
        }

        #[test]
        fn center_inverse(a in arb_box()) {
            let back = BBox::from_center(a.center(), a.w, a.h);
            prop_assert!((back.x - a.x).abs() < 1e-9 && (back.y - a.y).abs() < 1e-9);
            prop_assert_eq!((back.w, back.h), (a.w, a.h));
        }

        #[test]
        fn relocalization_invariants(prev in arb_box(), w in 720.0..4000.0f64, h in 100.0..720.0f64, factor in 0.5..10.0f64) {
            let dims = FrameDims::new(w, h).unwrap();
            let r = relocalization_reference(&prev, dims, factor).unwrap();
            let c = r.center();
            prop_assert!(c.x >= h / 2.0 - 1e-9 && c.x <= w - h / 2.0 + 1e-9);
            prop_assert!((r.w - h / factor).abs() < 1e-9 && (r.h - h / factor).abs() < 1e-9);
            prop_assert!((c.y - h / 2.0).abs() < 1e-9);
        }
    }
}
