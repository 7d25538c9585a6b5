//! Long-term precision/recall/F, robustness and latency on a hand-made trace.

use slopetrack::datamodel::{FrameAnnotation, Visibility};
use slopetrack::geometry::BBox;
use slopetrack::metrics::{fscore_optimize, gsr_curve, latency_profile, GsrOptions, Prediction, PredictionTrace, GSR_WINDOWS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let target = BBox::new(0.0, 0.0, 10.0, 10.0);
    let gts: Vec<FrameAnnotation> =
        (0..4).map(|t| FrameAnnotation { t, bbox: target, visibility: Visibility::Visible, camera_id: 1 }).collect();
    let trace = PredictionTrace::new(
        vec![
            Prediction::new(target, 0.9)?,
            Prediction::new(target, 0.9)?,
            Prediction::new(BBox::new(5.0, 0.0, 10.0, 10.0), 0.9)?,
            Prediction::new(BBox::new(100.0, 100.0, 10.0, 10.0), 0.2)?,
        ],
        None,
    );

    let lt = fscore_optimize(&trace, &gts, true)?;
    println!("threshold  precision  recall  F");
    for i in 0..lt.thresholds.len() {
        println!("{:9.2}  {:9.4}  {:6.4}  {:.4}", lt.thresholds[i], lt.precision[i], lt.recall[i], lt.fscore[i]);
    }
    println!("best F {:.4} at threshold {}", lt.best_f, lt.best_threshold);

    let gsr = gsr_curve(&trace, &gts, &GsrOptions::default())?;
    for (w, g) in GSR_WINDOWS.iter().zip(&gsr) {
        println!("GSR window {w:>2}: {g:.2}");
    }

    // a tracker needing 50 ms per frame on a 30 fps stream falls behind
    let lat = latency_profile(&[0.05; 100], 30.0)?;
    println!("delay of frame 99: {:.3} s, makespan {:.3} s", lat.delay[99], lat.makespan());
    Ok(())
}
