use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::datamodel::{Attribute, Discipline, Weather};

/// Scores of one evaluated sequence plus the keys used to group it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub id: String,
    pub discipline: Discipline,
    pub weather: Option<Weather>,
    /// Union of the attributes of the sequence's single-camera clips.
    pub attributes: BTreeSet<Attribute>,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub threshold: f64,
    /// GSR at each recovery window of the evaluation.
    pub gsr: Vec<f64>,
    /// Set when the tracker failed and the scores come from an empty trace.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKey {
    Overall,
    Discipline,
    Weather,
    Attribute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub kind: GroupKey,
    pub group: String,
    pub sequences: usize,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub gsr: Vec<f64>,
}

fn mean_row(kind: GroupKey, group: String, members: &[&SequenceResult]) -> Result<AggregateRow, MetricsError> {
    if members.is_empty() {
        return Err(MetricsError::EmptyGroup(group));
    }
    let n = members.len() as f64;
    let mean = |f: &dyn Fn(&SequenceResult) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / n;
    let width = members.iter().map(|r| r.gsr.len()).min().unwrap_or(0);
    let gsr = (0..width).map(|i| mean(&|r| r.gsr[i])).collect();
    Ok(AggregateRow {
        kind,
        group,
        sequences: members.len(),
        precision: mean(&|r| r.precision),
        recall: mean(&|r| r.recall),
        fscore: mean(&|r| r.fscore),
        gsr,
    })
}

/// Unweighted per-sequence means: the overall row first, then one row per
/// group present under each requested key. Sequences without weather are left
/// out of the weather rows; a sequence counts toward every attribute any of
/// its clips exhibits.
pub fn aggregate(results: &[SequenceResult], keys: &[GroupKey]) -> Result<Vec<AggregateRow>, MetricsError> {
    let all: Vec<&SequenceResult> = results.iter().collect();
    let mut rows = vec![mean_row(GroupKey::Overall, "overall".into(), &all)?];
    for &key in keys {
        let mut groups: BTreeMap<String, Vec<&SequenceResult>> = BTreeMap::new();
        for r in results {
            match key {
                GroupKey::Overall => {}
                GroupKey::Discipline => groups.entry(r.discipline.to_string()).or_default().push(r),
                GroupKey::Weather => {
                    if let Some(w) = r.weather {
                        groups.entry(w.to_string()).or_default().push(r);
                    }
                }
                GroupKey::Attribute => {
                    for a in &r.attributes {
                        groups.entry(a.to_string()).or_default().push(r);
                    }
                }
            }
        }
        for (name, members) in groups {
            rows.push(mean_row(key, name, &members)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(id: &str, f: f64, weather: Option<Weather>, attrs: &[Attribute]) -> SequenceResult {
        SequenceResult {
            id: id.into(),
            discipline: Discipline::AL,
            weather,
            attributes: attrs.iter().copied().collect(),
            precision: f,
            recall: f,
            fscore: f,
            threshold: 0.0,
            gsr: vec![f, 1.0],
            failure: None,
        }
    }

    #[test]
    fn overall_mean() {
        let rows = aggregate(&[result("a", 0.4, None, &[]), result("b", 0.8, None, &[])], &[]).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].fscore - 0.6).abs() < 1e-12);
        assert!((rows[0].gsr[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn weather_groups() {
        let rs = [
            result("a", 0.2, Some(Weather::Sunny), &[]),
            result("b", 0.4, Some(Weather::Sunny), &[]),
            result("c", 0.9, Some(Weather::Harsh), &[]),
        ];
        let rows = aggregate(&rs, &[GroupKey::Weather]).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.group.as_str()).collect();
        assert_eq!(names, vec!["overall", "harsh", "sunny"]);
        assert!((rows[2].fscore - 0.3).abs() < 1e-12);
        assert_eq!(rows[1].sequences, 1);
    }

    #[test]
    fn attribute_membership() {
        let rs = [result("a", 0.2, None, &[Attribute::SC, Attribute::FM]), result("b", 0.6, None, &[Attribute::SC])];
        let rows = aggregate(&rs, &[GroupKey::Attribute]).unwrap();
        let sc = rows.iter().find(|r| r.group == "SC").unwrap();
        assert_eq!(sc.sequences, 2);
        let fm = rows.iter().find(|r| r.group == "FM").unwrap();
        assert_eq!(fm.sequences, 1);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(aggregate(&[], &[]), Err(MetricsError::EmptyGroup(_))));
    }
}
