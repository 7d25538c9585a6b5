//! CSV and JSON report emission.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{AggregateRow, GroupKey, SequenceResult};

/// Evaluation settings echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalFlags {
    pub backend: String,
    pub init: String,
    pub include_occluded: bool,
    pub gsr_iou: f64,
    pub gsr_windows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub flags: EvalFlags,
    pub sequences: usize,
    pub failed_sequences: Vec<String>,
    pub overall: AggregateRow,
    pub groups: Vec<AggregateRow>,
}

fn group_kind(k: GroupKey) -> &'static str {
    match k {
        GroupKey::Overall => "overall",
        GroupKey::Discipline => "discipline",
        GroupKey::Weather => "weather",
        GroupKey::Attribute => "attribute",
    }
}

fn gsr_header(windows: &[usize]) -> String {
    windows.iter().map(|w| format!(",gsr_{w}")).collect()
}

pub fn per_sequence_csv(results: &[SequenceResult], windows: &[usize]) -> String {
    let mut out = format!("id,discipline,weather,precision,recall,fscore,threshold{},failure\n", gsr_header(windows));
    for r in results {
        let weather = r.weather.map(|w| w.to_string()).unwrap_or_default();
        let _ = write!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6}",
            r.id, r.discipline, weather, r.precision, r.recall, r.fscore, r.threshold
        );
        for g in &r.gsr {
            let _ = write!(out, ",{g:.6}");
        }
        let failure = r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(out, ",{failure}");
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow], windows: &[usize]) -> String {
    let mut out = format!("kind,group,sequences,precision,recall,fscore{}\n", gsr_header(windows));
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            group_kind(r.kind),
            r.group,
            r.sequences,
            r.precision,
            r.recall,
            r.fscore
        );
        for g in &r.gsr {
            let _ = write!(out, ",{g:.6}");
        }
        out.push('\n');
    }
    out
}

/// Two-column plot-ready CSV.
pub fn curve_csv(x_name: &str, y_name: &str, points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = format!("{x_name},{y_name}\n");
    for (x, y) in points {
        let _ = writeln!(out, "{x},{y:.6}");
    }
    out
}

pub fn summary_json(summary: &Summary) -> String {
    serde_json::to_string_pretty(summary).expect("summary is plain data")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Discipline, Weather};

    #[test]
    fn csv_shapes() {
        let r = SequenceResult {
            id: "v1".into(),
            discipline: Discipline::JP,
            weather: Some(Weather::Cloudy),
            attributes: Default::default(),
            precision: 0.5,
            recall: 0.25,
            fscore: 1.0 / 3.0,
            threshold: 0.5,
            gsr: vec![0.4, 1.0],
            failure: Some("peer closed, mid run".into()),
        };
        let text = per_sequence_csv(&[r], &[1, 7]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "id,discipline,weather,precision,recall,fscore,threshold,gsr_1,gsr_7,failure");
        assert_eq!(lines[1], "v1,JP,cloudy,0.500000,0.250000,0.333333,0.500000,0.400000,1.000000,peer closed; mid run");
        assert_eq!(curve_csv("window", "gsr", [(1.0, 0.5)]), "window,gsr\n1,0.500000\n");
    }
}
