//! SORT following one skier through noisy detections with false positives.

use slopetrack::metrics::{fscore_optimize, gsr_curve, GsrOptions};
use slopetrack::protocol::{run_ope, InitPolicy};
use slopetrack::simgen::{gen_detections, gen_mc_sequence, NoiseConfig, SimConfig};
use slopetrack::sort::{SortBackend, SortConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let video = gen_mc_sequence(&SimConfig { id: "demo".into(), frames: 240, seed: 4, ..Default::default() })?;
    for (label, noise) in [("noiseless", NoiseConfig::noiseless()), ("noisy", NoiseConfig { seed: 4, ..Default::default() })] {
        let detections = gen_detections(&video, &noise)?;
        let mut sort = SortBackend::new(detections, SortConfig::default())?;
        let run = run_ope(&mut sort, &video, &InitPolicy::GroundTruth)?;
        let lt = fscore_optimize(&run.trace, &video.frames, true)?;
        let gsr = gsr_curve(&run.trace, &video.frames, &GsrOptions::default())?;
        let lost = run.trace.predictions.iter().position(|p| !p.is_present());
        println!(
            "{label:>9}: F {:.3}  Pr {:.3}  Re {:.3}  GSR(1) {:.3}  track lost at {}",
            lt.best_f,
            lt.best_precision,
            lt.best_recall,
            gsr[0],
            lost.map_or("never".to_string(), |t| format!("frame {t}"))
        );
        if let Some(s) = sort.sort() {
            println!("           {} live tracks at the end", s.tracks.len());
        }
    }
    Ok(())
}
