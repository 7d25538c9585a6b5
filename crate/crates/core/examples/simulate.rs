//! Writes a small synthetic dataset and reads it back.
//!
//! Usage: cargo run --example simulate -- [OUT_DIR]

use slopetrack::dataset::{read_dataset, write_dataset};
use slopetrack::datamodel::label_clips;
use slopetrack::simgen::{simulate_dataset, DatasetConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("slopetrack-sim"));
    let entries = simulate_dataset(&DatasetConfig { videos: 6, frames: 150, seed: 42, ..Default::default() })?;
    write_dataset(&out, &entries)?;
    assert_eq!(read_dataset(&out)?, entries);

    println!("wrote {} sequences to {}", entries.len(), out.display());
    for e in &entries {
        let v = &e.video;
        let occluded = v.frames.iter().filter(|f| !f.is_visible()).count();
        let attrs: Vec<String> = label_clips(v)?.iter().map(|c| c.attributes.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("+")).map(|s| if s.is_empty() { "-".to_string() } else { s }).collect();
        println!(
            "{}  {}  {:<7} {} clips, {occluded:2} occluded frames, attributes per clip: {}",
            v.id,
            v.meta.discipline,
            v.meta.weather.map(|w| w.to_string()).unwrap_or_default(),
            attrs.len(),
            attrs.join(" | ")
        );
    }
    Ok(())
}
