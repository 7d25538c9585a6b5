use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DataError, Discipline, MCVideo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitCondition {
    Date,
    Athlete,
    Location,
}

impl fmt::Display for SplitCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitCondition::Date => "date",
            SplitCondition::Athlete => "athlete",
            SplitCondition::Location => "location",
        })
    }
}

impl FromStr for SplitCondition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "date" => Ok(SplitCondition::Date),
            "athlete" => Ok(SplitCondition::Athlete),
            "location" => Ok(SplitCondition::Location),
            other => Err(format!("unknown split condition {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub condition: SplitCondition,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

fn key_of(v: &MCVideo, condition: SplitCondition) -> Result<String, DataError> {
    let missing = || DataError::MissingCondition { video: v.id.clone(), condition };
    let present = |s: &Option<String>| s.as_ref().filter(|s| !s.trim().is_empty()).cloned();
    match condition {
        SplitCondition::Date => v.meta.date.map(|d| d.format("%Y-%m-%d").to_string()).ok_or_else(missing),
        SplitCondition::Athlete => present(&v.meta.athlete_id).ok_or_else(missing),
        SplitCondition::Location => present(&v.meta.location).ok_or_else(missing),
    }
}

fn train_target(n: usize, fraction: f64) -> usize {
    // tolerate representation error, e.g. 0.6 * 10 must be 6, not 7
    ((n as f64 * fraction) - 1e-9).ceil().max(0.0) as usize
}

/// Partitions videos into training and test ids.
///
/// `Date` sends the chronologically first `ceil(fraction * n)` videos of each
/// discipline to training. `Athlete` and `Location` keep every video sharing a
/// key on the same side: key groups are visited largest first (ties by key)
/// and a group joins training when doing so brings the per-discipline
/// training counts strictly closer to their targets.
pub fn generate_splits(
    videos: &[MCVideo],
    condition: SplitCondition,
    train_fraction: f64,
) -> Result<Split, DataError> {
    if videos.len() < 2 {
        return Err(DataError::TooFewVideos(videos.len()));
    }
    let keys = videos.iter().map(|v| key_of(v, condition)).collect::<Result<Vec<_>, _>>()?;

    let mut per_discipline: BTreeMap<Discipline, usize> = BTreeMap::new();
    for v in videos {
        *per_discipline.entry(v.meta.discipline).or_default() += 1;
    }
    let targets: BTreeMap<Discipline, usize> =
        per_discipline.iter().map(|(&d, &n)| (d, train_target(n, train_fraction))).collect();

    let mut in_train = vec![false; videos.len()];
    match condition {
        SplitCondition::Date => {
            for (&d, &target) in &targets {
                let mut idx: Vec<usize> = (0..videos.len()).filter(|&i| videos[i].meta.discipline == d).collect();
                idx.sort_by(|&a, &b| (&keys[a], &videos[a].id).cmp(&(&keys[b], &videos[b].id)));
                for &i in idx.iter().take(target) {
                    in_train[i] = true;
                }
            }
        }
        SplitCondition::Athlete | SplitCondition::Location => {
            let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, k) in keys.iter().enumerate() {
                groups.entry(k.as_str()).or_default().push(i);
            }
            let mut ordered: Vec<(&str, Vec<usize>)> = groups.into_iter().collect();
            ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(b.0)));

            let mut counts: BTreeMap<Discipline, usize> = targets.keys().map(|&d| (d, 0)).collect();
            let deviation = |counts: &BTreeMap<Discipline, usize>| -> usize {
                counts.iter().map(|(d, &c)| c.abs_diff(targets[d])).sum()
            };
            for (_, members) in ordered {
                let mut trial = counts.clone();
                for &i in &members {
                    *trial.get_mut(&videos[i].meta.discipline).unwrap() += 1;
                }
                if deviation(&trial) < deviation(&counts) {
                    counts = trial;
                    for &i in &members {
                        in_train[i] = true;
                    }
                }
            }
        }
    }

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (v, &t) in videos.iter().zip(&in_train) {
        if t { train.push(v.id.clone()) } else { test.push(v.id.clone()) }
    }
    Ok(Split { condition, train, test })
}

/// Counts comparable to a dataset split table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub condition: SplitCondition,
    pub train_videos: usize,
    pub test_videos: usize,
    pub train_frames: usize,
    pub test_frames: usize,
    pub train_per_discipline: BTreeMap<Discipline, usize>,
    pub test_per_discipline: BTreeMap<Discipline, usize>,
    pub train_keys: BTreeSet<String>,
    pub test_keys: BTreeSet<String>,
}

pub fn split_stats(videos: &[MCVideo], split: &Split) -> Result<SplitStats, DataError> {
    let train: BTreeSet<&str> = split.train.iter().map(String::as_str).collect();
    let mut s = SplitStats {
        condition: split.condition,
        train_videos: 0,
        test_videos: 0,
        train_frames: 0,
        test_frames: 0,
        train_per_discipline: BTreeMap::new(),
        test_per_discipline: BTreeMap::new(),
        train_keys: BTreeSet::new(),
        test_keys: BTreeSet::new(),
    };
    for v in videos {
        let key = key_of(v, split.condition)?;
        if train.contains(v.id.as_str()) {
            s.train_videos += 1;
            s.train_frames += v.len();
            *s.train_per_discipline.entry(v.meta.discipline).or_default() += 1;
            s.train_keys.insert(key);
        } else {
            s.test_videos += 1;
            s.test_frames += v.len();
            *s.test_per_discipline.entry(v.meta.discipline).or_default() += 1;
            s.test_keys.insert(key);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::test_support::video_with_cameras;
    use chrono::NaiveDate;

    fn dated(id: usize, day: u32) -> MCVideo {
        let mut v = video_with_cameras(&format!("v{id:02}"), &[1]);
        v.meta.date = NaiveDate::from_ymd_opt(2023, 1, day);
        v
    }

    #[test]
    fn date_split_is_chronological() {
        // ids deliberately not in date order
        let videos: Vec<MCVideo> = (0..10).map(|i| dated(i, 20 - i as u32)).collect();
        let s = generate_splits(&videos, SplitCondition::Date, 0.6).unwrap();
        assert_eq!(s.train.len(), 6);
        assert_eq!(s.test, vec!["v00", "v01", "v02", "v03"]);
    }

    #[test]
    fn athlete_groups_stay_together() {
        let videos: Vec<MCVideo> = (0..10)
            .map(|i| {
                let mut v = video_with_cameras(&format!("v{i}"), &[1]);
                v.meta.athlete_id = Some(if i < 6 { "A".into() } else { "B".into() });
                v
            })
            .collect();
        let s = generate_splits(&videos, SplitCondition::Athlete, 0.6).unwrap();
        assert_eq!(s.train, (0..6).map(|i| format!("v{i}")).collect::<Vec<_>>());
        let stats = split_stats(&videos, &s).unwrap();
        assert!(stats.train_keys.is_disjoint(&stats.test_keys));
    }

    #[test]
    fn missing_metadata_and_too_few() {
        let videos = vec![dated(0, 1), video_with_cameras("nodate", &[1])];
        assert!(matches!(
            generate_splits(&videos, SplitCondition::Date, 0.6),
            Err(DataError::MissingCondition { .. })
        ));
        assert!(matches!(
            generate_splits(&videos, SplitCondition::Location, 0.6),
            Err(DataError::MissingCondition { .. })
        ));
        assert!(matches!(generate_splits(&videos[..1], SplitCondition::Date, 0.6), Err(DataError::TooFewVideos(1))));
    }

    #[test]
    fn target_rounding() {
        assert_eq!(train_target(10, 0.6), 6);
        assert_eq!(train_target(7, 0.6), 5);
        assert_eq!(train_target(300, 0.6), 180);
    }
}
