//! Two-instance fusion: a tracker that loses confidence around a camera cut
//! and a re-detector that brings it back.

use slopetrack::fusion::{fusion_init, FramePath, FusionConfig};
use slopetrack::metrics::{fscore_optimize, PredictionTrace};
use slopetrack::protocol::{FrameContext, TrackerBackend};
use slopetrack::simgen::{gen_mc_sequence, OracleBackend, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let video = gen_mc_sequence(&SimConfig { id: "demo".into(), frames: 120, cuts: vec![60], seed: 2, ..Default::default() })?;
    let ctx = |t| FrameContext::for_video(&video, t);

    let tracker = OracleBackend::new(&video, 2.0, 1)?.with_confidence(60..64, 0.2);
    let redetector = OracleBackend::new(&video, 4.0, 2)?.with_confidence(0..63, 0.3).with_confidence(63..120, 0.8);
    let mut fusion = fusion_init(FusionConfig::default(), tracker, redetector, &ctx(0), video.frames[0].bbox)?;

    let mut predictions = vec![slopetrack::metrics::Prediction { bbox: Some(video.frames[0].bbox), confidence: 1.0 }];
    for t in 1..video.len() {
        predictions.push(fusion.update(&ctx(t))?);
    }
    for r in fusion.log().iter().filter(|r| r.path == FramePath::Fallback || r.reinit) {
        println!(
            "frame {:3}: {:?}  tracker γ {:.2}  re-detector γ {:.2}{}",
            r.t,
            r.path,
            r.tracker_confidence,
            r.redetector_confidence.unwrap_or(f64::NAN),
            if r.reinit { "  -> tracker re-initialized" } else { "" }
        );
    }
    let trace = PredictionTrace::new(predictions, Some(0));
    println!("fused F {:.3}", fscore_optimize(&trace, &video.frames, true)?.best_f);
    Ok(())
}
