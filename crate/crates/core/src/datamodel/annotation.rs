//! Text annotation documents, one per multi-camera video.
//!
//! ```text
//! id: run_042
//! discipline: AL
//! weather: sunny
//! date: 2023-01-14
//! fps: 30
//! width: 1920
//! height: 1080
//! param.gate_count: 54
//! manual.0: CM,BC
//!
//! t,x,y,w,h,visibility,camera_id
//! 0,812,403,38,92,V,1
//! 1,815,401,38,93,O,1
//! ```
//!
//! `param.<name>` lines carry performance parameters and `manual.<start>`
//! lines list the manual attributes of the clip beginning at frame `start`.
//! The CSV header row is optional on input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::NaiveDate;

use super::{Attribute, DataError, Discipline, FrameAnnotation, MCVideo, VideoMeta, Visibility};
use crate::geometry::{BBox, FrameDims};

const FRAME_HEADER: &str = "t,x,y,w,h,visibility,camera_id";

#[derive(Default)]
struct Header {
    id: Option<String>,
    discipline: Option<Discipline>,
    fps: Option<f64>,
    width: Option<f64>,
    height: Option<f64>,
}

fn parse_num<T: std::str::FromStr>(line: usize, field: &str, raw: &str) -> Result<T, DataError>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse::<T>()
        .map_err(|e| DataError::syntax(line, field, format!("cannot parse {raw:?}: {e}")))
}

pub fn parse_annotations(input: &str) -> Result<MCVideo, DataError> {
    let mut header = Header::default();
    let mut meta = VideoMeta::new(Discipline::AL, 1.0, FrameDims { width: 1.0, height: 1.0 });
    let mut manual: BTreeMap<usize, BTreeSet<Attribute>> = BTreeMap::new();
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));

    let mut saw_separator = false;
    for (ln, line) in lines.by_ref() {
        if line.trim().is_empty() {
            saw_separator = true;
            break;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| DataError::syntax(ln, "header", format!("expected `key: value`, found {line:?}")))?;
        let key = key.trim();
        let value = value.trim();
        let text = || Some(value.to_string());
        match key {
            "id" => header.id = Some(value.to_string()),
            "discipline" => {
                header.discipline = Some(value.parse().map_err(|e: String| DataError::syntax(ln, key, e))?)
            }
            "sub_discipline" => meta.sub_discipline = text(),
            "weather" => meta.weather = Some(value.parse().map_err(|e: String| DataError::syntax(ln, key, e))?),
            "athlete_id" => meta.athlete_id = text(),
            "nationality" => meta.athlete_nationality = text(),
            "location" => meta.location = text(),
            "country" => meta.country = text(),
            "date" => {
                meta.date = Some(
                    NaiveDate::parse_from_str(value, "%Y-%m-%d")
                        .map_err(|e| DataError::syntax(ln, key, format!("expected YYYY-MM-DD: {e}")))?,
                )
            }
            "fps" => header.fps = Some(parse_num(ln, key, value)?),
            "width" => header.width = Some(parse_num(ln, key, value)?),
            "height" => header.height = Some(parse_num(ln, key, value)?),
            k if k.starts_with("param.") && k.len() > "param.".len() => {
                meta.performance_params.insert(k["param.".len()..].to_string(), value.to_string());
            }
            k if k.starts_with("manual.") => {
                let start: usize = parse_num(ln, key, &k["manual.".len()..])?;
                let set = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.parse::<Attribute>().map_err(|e| DataError::syntax(ln, key, e)))
                    .collect::<Result<BTreeSet<_>, _>>()?;
                manual.insert(start, set);
            }
            other => return Err(DataError::syntax(ln, other, "unknown header key")),
        }
    }
    if !saw_separator {
        return Err(DataError::syntax(input.lines().count().max(1), "document", "missing blank line before frame rows"));
    }

    let missing = |f: &str| DataError::syntax(0, f, "required header key missing");
    let id = header.id.ok_or_else(|| missing("id"))?;
    meta.discipline = header.discipline.ok_or_else(|| missing("discipline"))?;
    meta.fps = header.fps.ok_or_else(|| missing("fps"))?;
    meta.resolution = FrameDims {
        width: header.width.ok_or_else(|| missing("width"))?,
        height: header.height.ok_or_else(|| missing("height"))?,
    };

    let mut frames = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if frames.is_empty() && line.trim() == FRAME_HEADER {
            continue;
        }
        frames.push(parse_frame_row(ln, line)?);
    }

    let video = MCVideo { id, frames, meta, manual_attributes: manual };
    video.validate()?;
    Ok(video)
}

fn parse_frame_row(ln: usize, line: &str) -> Result<FrameAnnotation, DataError> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    if cols.len() != 7 {
        return Err(DataError::syntax(ln, "row", format!("expected 7 columns ({FRAME_HEADER}), found {}", cols.len())));
    }
    let visibility = match cols[5] {
        "V" => Visibility::Visible,
        "O" => Visibility::Occluded,
        other => return Err(DataError::syntax(ln, "visibility", format!("expected V or O, found {other:?}"))),
    };
    let bbox = BBox::new(
        parse_num(ln, "x", cols[1])?,
        parse_num(ln, "y", cols[2])?,
        parse_num(ln, "w", cols[3])?,
        parse_num(ln, "h", cols[4])?,
    );
    bbox.validate().map_err(|e| DataError::syntax(ln, "box", e.to_string()))?;
    Ok(FrameAnnotation { t: parse_num(ln, "t", cols[0])?, bbox, visibility, camera_id: parse_num(ln, "camera_id", cols[6])? })
}

pub fn serialize_annotations(video: &MCVideo) -> String {
    let m = &video.meta;
    let mut out = String::new();
    let mut kv = |k: &str, v: &dyn std::fmt::Display| {
        let _ = writeln!(out, "{k}: {v}");
    };
    kv("id", &video.id);
    kv("discipline", &m.discipline);
    let optional: [(&str, Option<&String>); 5] = [
        ("sub_discipline", m.sub_discipline.as_ref()),
        ("athlete_id", m.athlete_id.as_ref()),
        ("nationality", m.athlete_nationality.as_ref()),
        ("location", m.location.as_ref()),
        ("country", m.country.as_ref()),
    ];
    for (k, v) in optional {
        if let Some(v) = v {
            kv(k, v);
        }
    }
    if let Some(w) = m.weather {
        kv("weather", &w);
    }
    if let Some(d) = m.date {
        kv("date", &d.format("%Y-%m-%d"));
    }
    kv("fps", &m.fps);
    kv("width", &m.resolution.width);
    kv("height", &m.resolution.height);
    for (k, v) in &m.performance_params {
        kv(&format!("param.{k}"), v);
    }
    for (start, attrs) in &video.manual_attributes {
        let codes: Vec<&str> = attrs.iter().map(|a| a.code()).collect();
        kv(&format!("manual.{start}"), &codes.join(","));
    }
    out.push('\n');
    out.push_str(FRAME_HEADER);
    out.push('\n');
    for f in &video.frames {
        let vis = match f.visibility {
            Visibility::Visible => 'V',
            Visibility::Occluded => 'O',
        };
        let b = f.bbox;
        let _ = writeln!(out, "{},{},{},{},{},{},{}", f.t, b.x, b.y, b.w, b.h, vis, f.camera_id);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{segment_clips, Weather};
    use proptest::prelude::*;

    const MINIMAL: &str = "id: v1\ndiscipline: JP\nfps: 30\nwidth: 1280\nheight: 720\n\n0,1,2,3,4,V,1\n";

    #[test]
    fn minimal_document() {
        let v = parse_annotations(MINIMAL).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.meta.discipline, Discipline::JP);
        assert_eq!(v.frames[0].bbox, BBox::new(1.0, 2.0, 3.0, 4.0));
    }

    #[test]
    fn three_rows_two_clips() {
        let doc = "id: v\ndiscipline: AL\nfps: 25\nwidth: 1920\nheight: 1080\n\n\
                   t,x,y,w,h,visibility,camera_id\n0,1,1,5,5,V,1\n1,1,1,5,5,O,1\n2,9,9,5,5,V,2\n";
        let v = parse_annotations(doc).unwrap();
        assert_eq!(segment_clips(&v).len(), 2);
        assert_eq!(v.frames[1].visibility, Visibility::Occluded);
    }

    #[test]
    fn gap_is_invariant_violation() {
        let doc = "id: v\ndiscipline: AL\nfps: 25\nwidth: 100\nheight: 100\n\n0,1,1,5,5,V,1\n2,1,1,5,5,V,1\n";
        assert!(matches!(parse_annotations(doc), Err(DataError::Invariant { .. })));
    }

    #[test]
    fn syntax_errors_carry_line_and_field() {
        let doc = "id: v\ndiscipline: AL\nfps: 25\nwidth: 100\nheight: 100\n\n0,1,1,5,5,V,1\n1,1,zz,5,5,V,1\n";
        match parse_annotations(doc) {
            Err(DataError::Syntax { line, field, .. }) => assert_eq!((line, field.as_str()), (8, "y")),
            other => panic!("unexpected {other:?}"),
        }
        let doc = "id: v\ndiscipline: XX\n";
        assert!(matches!(parse_annotations(doc), Err(DataError::Syntax { line: 2, .. })));
        let doc = "id: v\ndiscipline: AL\nfps: 25\nwidth: 100\nheight: 100\n\n0,1,1,5,5,Q,1\n";
        assert!(matches!(parse_annotations(doc), Err(DataError::Syntax { line: 7, .. })));
        assert!(parse_annotations("id: v\nfoo: 1\n\n").is_err());
    }

    #[test]
    fn full_metadata_round_trip() {
        let doc = "id: run7\ndiscipline: FS\nsub_discipline: big air\nathlete_id: A1\nnationality: NOR\n\
                   location: Laax\ncountry: SUI\nweather: harsh\ndate: 2023-01-14\nfps: 29.97\nwidth: 1920\n\
                   height: 1080\nparam.score: 88.5\nmanual.0: CM,BC\n\nt,x,y,w,h,visibility,camera_id\n\
                   0,1.5,2,3,4,V,1\n";
        let v = parse_annotations(doc).unwrap();
        assert_eq!(v.meta.weather, Some(Weather::Harsh));
        assert_eq!(v.meta.performance_params["score"], "88.5");
        assert_eq!(serialize_annotations(&v), doc);
    }

    fn arb_video() -> impl Strategy<Value = MCVideo> {
        let frame = (-50.0..2000.0f64, -50.0..1100.0f64, 0.0..400.0f64, 0.0..400.0f64, any::<bool>(), 1u32..5);
        (prop::collection::vec(frame, 1..40), 1.0..120.0f64, prop::option::of("[a-z]{1,8}"), any::<bool>()).prop_map(
            |(rows, fps, athlete, has_date)| {
                let frames = rows
                    .into_iter()
                    .enumerate()
                    .map(|(t, (x, y, w, h, vis, cam))| FrameAnnotation {
                        t,
                        bbox: BBox::new(x, y, w, h),
                        visibility: if vis { Visibility::Visible } else { Visibility::Occluded },
                        camera_id: cam,
                    })
                    .collect();
                let mut meta = VideoMeta::new(Discipline::AL, fps, FrameDims { width: 1920.0, height: 1080.0 });
                meta.athlete_id = athlete;
                meta.weather = Some(Weather::Cloudy);
                if has_date {
                    meta.date = NaiveDate::from_ymd_opt(2022, 3, 9);
                }
                MCVideo { id: "gen".into(), frames, meta, manual_attributes: BTreeMap::new() }
            },
        )
    }

    proptest! {
        #[test]
        fn parse_serialize_identity(v in arb_video()) {
            let text = serialize_annotations(&v);
            prop_assert_eq!(parse_annotations(&text).unwrap(), v);
        }
    }
}
