//! Dataset directories: one sub-directory per video holding
//! `annotation.txt` and optionally `detections.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::datamodel::{parse_annotations, serialize_annotations, DataError, MCVideo};
use crate::protocol::{parse_detections, serialize_detections, BackendError, DetectionStream};

pub const ANNOTATION_FILE: &str = "annotation.txt";
pub const DETECTIONS_FILE: &str = "detections.csv";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Annotation {
        path: PathBuf,
        #[source]
        source: DataError,
    },
    #[error("{path}: {source}")]
    Detections {
        path: PathBuf,
        #[source]
        source: BackendError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no videos under {0}")]
    Empty(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub video: MCVideo,
    pub detections: Option<DetectionStream>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// Loads every video directory under `root`, ordered by directory name.
pub fn read_dataset(root: &Path) -> Result<Vec<DatasetEntry>, DatasetError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io(root))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.join(ANNOTATION_FILE).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(DatasetError::Empty(root.to_path_buf()));
    }
    dirs.iter().map(|d| read_entry(d)).collect()
}

pub fn read_entry(dir: &Path) -> Result<DatasetEntry, DatasetError> {
    let path = dir.join(ANNOTATION_FILE);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let video = parse_annotations(&text).map_err(|source| DatasetError::Annotation { path: path.clone(), source })?;
    let det_path = dir.join(DETECTIONS_FILE);
    let detections = if det_path.is_file() {
        let text = fs::read_to_string(&det_path).map_err(io(&det_path))?;
        Some(parse_detections(&text, video.len()).map_err(|source| DatasetError::Detections { path: det_path, source })?)
    } else {
        None
    };
    Ok(DatasetEntry { video, detections })
}

/// Writes `entries` under `root`, one directory per video id.
pub fn write_dataset(root: &Path, entries: &[DatasetEntry]) -> Result<(), DatasetError> {
    for e in entries {
        let dir = root.join(&e.video.id);
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        let path = dir.join(ANNOTATION_FILE);
        fs::write(&path, serialize_annotations(&e.video)).map_err(io(&path))?;
        if let Some(d) = &e.detections {
            let path = dir.join(DETECTIONS_FILE);
            fs::write(&path, serialize_detections(d)).map_err(io(&path))?;
        }
    }
    Ok(())
}
