//! Backend and initialization selectors given on the command line.
//!
//! ```text
//! trace:DIR              replay DIR/<id>.csv
//! sort                   SORT on the dataset's detections.csv
//! sort:DIR               SORT on DIR/<id>.csv
//! oracle[:SIGMA]         ground truth with seeded center jitter
//! fusion:A,B             A tracks, B re-detects
//! extern:CMD ARGS...     spawn a wire-protocol peer per sequence
//! extern:tcp:HOST:PORT   connect to a wire-protocol peer per sequence
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetEntry;
use crate::fusion::{Fusion, FusionConfig};
use crate::protocol::{parse_detections, BackendError, DetectionStream, ExternBackend, InitPolicy, TraceBackend, TrackerBackend};
use crate::simgen::OracleBackend;
use crate::sort::{SortBackend, SortConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Trace(PathBuf),
    Sort(Option<PathBuf>),
    Oracle(f64),
    Fusion(Box<BackendSpec>, Box<BackendSpec>),
    ExternCommand(String),
    ExternTcp(String),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        let need = |what: &str| rest.filter(|r| !r.trim().is_empty()).ok_or_else(|| format!("backend {kind} needs {what}"));
        match kind {
            "trace" => Ok(BackendSpec::Trace(need("a directory")?.into())),
            "sort" => Ok(BackendSpec::Sort(rest.filter(|r| !r.is_empty()).map(Into::into))),
            "oracle" => match rest {
                None => Ok(BackendSpec::Oracle(0.0)),
                Some(r) => r
                    .parse::<f64>()
                    .ok()
                    .filter(|v| *v >= 0.0 && v.is_finite())
                    .map(BackendSpec::Oracle)
                    .ok_or_else(|| format!("oracle jitter {r:?} is not a non-negative number")),
            },
            "fusion" => {
                let (a, b) = need("two inner backends")?.split_once(',').ok_or("fusion needs A,B")?;
                let (a, b): (BackendSpec, BackendSpec) = (a.parse()?, b.parse()?);
                if matches!(a, BackendSpec::Fusion(..)) || matches!(b, BackendSpec::Fusion(..)) {
                    return Err("fusion backends cannot nest".into());
                }
                Ok(BackendSpec::Fusion(Box::new(a), Box::new(b)))
            }
            "extern" => {
                let r = need("a command or tcp:HOST:PORT")?;
                match r.strip_prefix("tcp:") {
                    Some(addr) if addr.contains(':') => Ok(BackendSpec::ExternTcp(addr.into())),
                    Some(_) => Err(format!("extern tcp address {r:?} must be HOST:PORT")),
                    None => Ok(BackendSpec::ExternCommand(r.into())),
                }
            }
            other => Err(format!("unknown backend {other:?}; expected trace, sort, oracle, fusion or extern")),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Trace(d) => write!(f, "trace:{}", d.display()),
            BackendSpec::Sort(None) => write!(f, "sort"),
            BackendSpec::Sort(Some(d)) => write!(f, "sort:{}", d.display()),
            BackendSpec::Oracle(s) if *s == 0.0 => write!(f, "oracle"),
            BackendSpec::Oracle(s) => write!(f, "oracle:{s}"),
            BackendSpec::Fusion(a, b) => write!(f, "fusion:{a},{b}"),
            BackendSpec::ExternCommand(c) => write!(f, "extern:{c}"),
            BackendSpec::ExternTcp(a) => write!(f, "extern:tcp:{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    GroundTruth,
    /// Detections from `DIR/<id>.csv`, or the dataset's own file when `None`.
    Detector { dir: Option<PathBuf>, threshold: f64 },
}

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let threshold = InitPolicy::DEFAULT_DETECTOR_THRESHOLD;
        match s {
            "gt" => return Ok(InitSpec::GroundTruth),
            "detector" => return Ok(InitSpec::Detector { dir: None, threshold }),
            _ => {}
        }
        let rest = s.strip_prefix("detector:").ok_or_else(|| format!("init {s:?}: expected gt or detector[:PATH[:THR]]"))?;
        let (dir, threshold) = match rest.rsplit_once(':') {
            Some((d, t)) => match t.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => (d, v),
                Ok(v) => return Err(format!("detector threshold {v} outside [0, 1]")),
                Err(_) => (rest, threshold),
            },
            None => (rest, threshold),
        };
        let dir = (!dir.is_empty()).then(|| PathBuf::from(dir));
        Ok(InitSpec::Detector { dir, threshold })
    }
}

impl fmt::Display for InitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitSpec::GroundTruth => write!(f, "gt"),
            InitSpec::Detector { dir: None, threshold } => write!(f, "detector::{threshold}"),
            InitSpec::Detector { dir: Some(d), threshold } => write!(f, "detector:{}:{threshold}", d.display()),
        }
    }
}

/// Settings for a wire-protocol peer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExternConfig {
    /// Whether the peer accepts `set_ref`.
    pub reference_box: bool,
    pub search_area_factor: f64,
}

impl Default for ExternConfig {
    fn default() -> Self {
        Self { reference_box: true, search_area_factor: 5.0 }
    }
}

/// Contents of the `--config` TOML file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fusion: FusionConfig,
    pub sort: SortConfig,
    #[serde(rename = "extern")]
    pub extern_peer: ExternConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.fusion.validate().map_err(|e| e.to_string())?;
        cfg.sort.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

impl BackendSpec {
    /// Checks paths that must exist before any sequence runs.
    pub fn check(&self) -> Result<(), String> {
        match self {
            BackendSpec::Trace(d) | BackendSpec::Sort(Some(d)) if !d.is_dir() => {
                Err(format!("{} is not a directory", d.display()))
            }
            BackendSpec::Fusion(a, b) => a.check().and_then(|_| b.check()),
            _ => Ok(()),
        }
    }

    /// True when the selected backend talks to a foreign peer.
    pub fn is_extern(&self) -> bool {
        match self {
            BackendSpec::ExternCommand(_) | BackendSpec::ExternTcp(_) => true,
            BackendSpec::Fusion(a, b) => a.is_extern() || b.is_extern(),
            _ => false,
        }
    }

    /// Builds a fresh backend for one sequence.
    pub fn build(&self, entry: &DatasetEntry, cfg: &RunConfig, seed: u64) -> Result<Box<dyn TrackerBackend>, BackendError> {
        let id = &entry.video.id;
        Ok(match self {
            BackendSpec::Trace(dir) => Box::new(TraceBackend::from_file(&dir.join(format!("{id}.csv")))?),
            BackendSpec::Sort(dir) => {
                let stream = match dir {
                    Some(d) => load_detections(d, entry)?,
                    None => entry
                        .detections
                        .clone()
                        .ok_or_else(|| BackendError::Trace(format!("sequence {id} has no detections file")))?,
                };
                Box::new(SortBackend::new(stream, cfg.sort)?)
            }
            BackendSpec::Oracle(sigma) => Box::new(OracleBackend::new(&entry.video, *sigma, seed)?),
            BackendSpec::Fusion(a, b) => Box::new(Fusion::new(cfg.fusion, a.build(entry, cfg, seed)?, b.build(entry, cfg, seed)?)?),
            BackendSpec::ExternCommand(cmd) => Box::new(
                ExternBackend::spawn(cmd)?
                    .with_reference_capability(cfg.extern_peer.reference_box)
                    .with_search_area_factor(cfg.extern_peer.search_area_factor),
            ),
            BackendSpec::ExternTcp(addr) => Box::new(
                ExternBackend::connect(addr)?
                    .with_reference_capability(cfg.extern_peer.reference_box)
                    .with_search_area_factor(cfg.extern_peer.search_area_factor),
            ),
        })
    }
}

impl InitSpec {
    pub fn check(&self) -> Result<(), String> {
        match self {
            InitSpec::Detector { dir: Some(d), .. } if !d.is_dir() => Err(format!("{} is not a directory", d.display())),
            _ => Ok(()),
        }
    }

    pub fn policy(&self, entry: &DatasetEntry) -> Result<InitPolicy, BackendError> {
        match self {
            InitSpec::GroundTruth => Ok(InitPolicy::GroundTruth),
            InitSpec::Detector { dir, threshold } => {
                let stream = match dir {
                    Some(d) => load_detections(d, entry)?,
                    None => entry.detections.clone().ok_or_else(|| {
                        BackendError::Trace(format!("sequence {} has no detections file", entry.video.id))
                    })?,
                };
                Ok(InitPolicy::Detector { stream, threshold: *threshold })
            }
        }
    }
}

fn load_detections(dir: &Path, entry: &DatasetEntry) -> Result<DetectionStream, BackendError> {
    let text = std::fs::read_to_string(dir.join(format!("{}.csv", entry.video.id)))?;
    parse_detections(&text, entry.video.len())
}
