use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gen_detections, gen_mc_sequence, rng, streams, NoiseConfig, SimConfig, SimError, DEFAULT_OCCLUSION_LEN};
use crate::dataset::DatasetEntry;
use crate::datamodel::{Attribute, Discipline, Weather};
use crate::geometry::FrameDims;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub videos: usize,
    pub frames: usize,
    pub fps: f64,
    pub dims: FrameDims,
    /// Cameras per video are drawn from `1..=max_cameras`.
    pub max_cameras: u32,
    /// Chance that a video contains one complete occlusion.
    pub occlusion_probability: f64,
    pub occlusion_len: usize,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            videos: 5,
            frames: 300,
            fps: 30.0,
            dims: FrameDims { width: 1280.0, height: 720.0 },
            max_cameras: 3,
            occlusion_probability: 0.5,
            occlusion_len: DEFAULT_OCCLUSION_LEN,
            noise: NoiseConfig::default(),
            seed: 0,
        }
    }
}

const DISCIPLINES: [Discipline; 3] = [Discipline::AL, Discipline::JP, Discipline::FS];
const WEATHER: [Weather; 3] = [Weather::Sunny, Weather::Cloudy, Weather::Harsh];
const NATIONS: [&str; 6] = ["AUT", "FRA", "ITA", "NOR", "SUI", "USA"];

fn sub_disciplines(d: Discipline) -> &'static [&'static str] {
    match d {
        Discipline::AL => &["slalom", "giant slalom", "super g", "downhill"],
        Discipline::JP => &["normal hill", "large hill"],
        Discipline::FS => &["slopestyle", "big air", "aerials"],
    }
}

/// A simulated dataset with metadata, ground truth and detections.
///
/// Discipline cycles AL, JP, FS and weather cycles so that any three
/// consecutive videos cover all conditions. Athletes and venues are drawn
/// from per-discipline pools sized so that several videos share each key.
pub fn simulate_dataset(cfg: &DatasetConfig) -> Result<Vec<DatasetEntry>, SimError> {
    if cfg.videos == 0 || cfg.max_cameras == 0 {
        return Err(SimError::Config("videos and max_cameras must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.occlusion_probability) || cfg.occlusion_len == 0 {
        return Err(SimError::Config("occlusion probability must lie in [0, 1] with positive length".into()));
    }
    let mut r = rng(cfg.seed, streams::DATASET);
    let per_discipline = cfg.videos.div_ceil(3);
    let athletes = (per_discipline / 2).max(1);
    let venues = (per_discipline / 3).max(1);
    let epoch = NaiveDate::from_ymd_opt(2022, 11, 1).expect("valid date");

    let mut out = Vec::with_capacity(cfg.videos);
    for i in 0..cfg.videos {
        let discipline = DISCIPLINES[i % 3];
        let cameras = r.random_range(1..=cfg.max_cameras) as usize;
        let mut cuts: Vec<usize> = Vec::new();
        if cameras > 1 && cfg.frames > cameras * 10 {
            // Evenly spaced cuts shifted by a few frames.
            let span = cfg.frames / cameras;
            for c in 1..cameras {
                cuts.push(c * span + r.random_range(0..span / 4));
            }
        }
        let mut occlusions = Vec::new();
        if r.random_bool(cfg.occlusion_probability) && cfg.frames > cfg.occlusion_len + 2 {
            occlusions.push((r.random_range(1..cfg.frames - cfg.occlusion_len), cfg.occlusion_len));
        }
        let sim = SimConfig {
            id: format!("sim_{i:03}"),
            discipline,
            frames: cfg.frames,
            fps: cfg.fps,
            dims: cfg.dims,
            cuts,
            occlusions,
            seed: r.random(),
            ..SimConfig::default()
        };
        let mut video = gen_mc_sequence(&sim)?;

        let athlete = r.random_range(0..athletes);
        let venue = r.random_range(0..venues);
        let meta = &mut video.meta;
        meta.sub_discipline = sub_disciplines(discipline).choose(&mut r).map(|s| s.to_string());
        meta.weather = Some(WEATHER[(i + i / 3) % 3]);
        meta.athlete_id = Some(format!("{discipline}-athlete-{athlete:02}"));
        meta.athlete_nationality = Some(NATIONS[athlete % NATIONS.len()].into());
        meta.location = Some(format!("{discipline}-venue-{venue:02}"));
        meta.country = Some(NATIONS[(venue + 3) % NATIONS.len()].into());
        meta.date = epoch.checked_add_days(Days::new(r.random_range(0..365)));
        meta.performance_params.insert("bib".into(), (i + 1).to_string());

        let starts: Vec<usize> = std::iter::once(0).chain(sim.cuts.iter().copied()).collect();
        for s in starts {
            let mut manual = std::collections::BTreeSet::new();
            for a in [Attribute::CM, Attribute::BC, Attribute::IV, Attribute::MB] {
                if r.random_bool(0.25) {
                    manual.insert(a);
                }
            }
            if !manual.is_empty() {
                video.manual_attributes.insert(s, manual);
            }
        }

        let noise = NoiseConfig { seed: r.random(), ..cfg.noise };
        let detections = gen_detections(&video, &noise)?;
        out.push(DatasetEntry { video, detections: Some(detections) });
    }
    Ok(out)
}
