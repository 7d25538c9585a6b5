//! Prediction trace and detection stream CSV files.
//!
//! Trace rows are `t,x,y,w,h,conf`; an absent box leaves the four box
//! columns empty, and the initialization row carries a seventh column `init`.
//! Detection rows are `t,x,y,w,h,score`, any number per frame.

use std::fmt::Write as _;

use super::{BackendError, Detection, DetectionStream};
use crate::geometry::BBox;
use crate::metrics::{Prediction, PredictionTrace};

const TRACE_HEADER: &str = "t,x,y,w,h,conf";
const DETECTION_HEADER: &str = "t,x,y,w,h,score";

fn err(line: usize, msg: impl std::fmt::Display) -> BackendError {
    BackendError::Trace(format!("line {line}: {msg}"))
}

fn num(line: usize, field: &str, raw: &str) -> Result<f64, BackendError> {
    raw.parse::<f64>().map_err(|e| err(line, format!("{field}: cannot parse {raw:?}: {e}")))
}

fn rows<'a>(input: &'a str, header: &'a str) -> impl Iterator<Item = (usize, Vec<&'a str>)> + 'a {
    input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(move |(i, l)| !l.is_empty() && !(*i == 1 && l.starts_with(header)))
        .map(|(i, l)| (i, l.split(',').map(str::trim).collect()))
}

pub fn parse_trace(input: &str) -> Result<PredictionTrace, BackendError> {
    let mut predictions = Vec::new();
    let mut init_frame = None;
    for (ln, cols) in rows(input, TRACE_HEADER) {
        if !(6..=7).contains(&cols.len()) {
            return Err(err(ln, format!("expected 6 or 7 columns, found {}", cols.len())));
        }
        let t: usize = cols[0].parse().map_err(|e| err(ln, format!("t: {e}")))?;
        if t != predictions.len() {
            return Err(err(ln, format!("expected frame {}, found {t}", predictions.len())));
        }
        let confidence = num(ln, "conf", cols[5])?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(err(ln, format!("confidence {confidence} outside [0, 1]")));
        }
        let bbox = if cols[1..5].iter().all(|c| c.is_empty()) {
            None
        } else {
            let b = BBox::new(num(ln, "x", cols[1])?, num(ln, "y", cols[2])?, num(ln, "w", cols[3])?, num(ln, "h", cols[4])?);
            b.validate().map_err(|e| err(ln, e))?;
            Some(b)
        };
        match cols.get(6) {
            None | Some(&"") => {}
            Some(&"init") if init_frame.is_none() => init_frame = Some(t),
            Some(flag) => return Err(err(ln, format!("unexpected flag {flag:?}"))),
        }
        predictions.push(Prediction { bbox, confidence });
    }
    Ok(PredictionTrace::new(predictions, init_frame))
}

pub fn serialize_trace(trace: &PredictionTrace) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for (t, p) in trace.predictions.iter().enumerate() {
        match p.bbox {
            Some(b) => {
                let _ = write!(out, "{t},{},{},{},{},{}", b.x, b.y, b.w, b.h, p.confidence);
            }
            None => {
                let _ = write!(out, "{t},,,,,{}", p.confidence);
            }
        }
        if trace.init_frame == Some(t) {
            out.push_str(",init");
        }
        out.push('\n');
    }
    out
}

/// Parses a detection file for a video of `frames` frames.
pub fn parse_detections(input: &str, frames: usize) -> Result<DetectionStream, BackendError> {
    let mut out = vec![Vec::new(); frames];
    for (ln, cols) in rows(input, DETECTION_HEADER) {
        if cols.len() != 6 {
            return Err(err(ln, format!("expected 6 columns, found {}", cols.len())));
        }
        let t: usize = cols[0].parse().map_err(|e| err(ln, format!("t: {e}")))?;
        if t >= frames {
            return Err(err(ln, format!("frame {t} beyond video length {frames}")));
        }
        let bbox = BBox::new(num(ln, "x", cols[1])?, num(ln, "y", cols[2])?, num(ln, "w", cols[3])?, num(ln, "h", cols[4])?);
        bbox.validate().map_err(|e| err(ln, e))?;
        let score = num(ln, "score", cols[5])?;
        if !(0.0..=1.0).contains(&score) {
            return Err(err(ln, format!("score {score} outside [0, 1]")));
        }
        out[t].push(Detection { bbox, score });
    }
    Ok(DetectionStream::new(out))
}

pub fn serialize_detections(stream: &DetectionStream) -> String {
    let mut out = format!("{DETECTION_HEADER}\n");
    for (t, dets) in stream.frames.iter().enumerate() {
        for d in dets {
            let b = d.bbox;
            let _ = writeln!(out, "{t},{},{},{},{},{}", b.x, b.y, b.w, b.h, d.score);
        }
    }
    out
}
