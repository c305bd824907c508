//! MOT ground-truth text: `frame,id,x,y,w,h,conf,class,visibility`, one box
//! per line, frames counted from 1.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nbtrack_core::BBox;

use crate::appearance::random_unit;
use crate::error::{SimError, SimResult};
use crate::rng::{stream, MOT_APPEARANCE};
use crate::scene::{ObjectId, ObjectSpec, Occluder, Occlusion, Scene, SensorModel, Trajectory};

pub const DEFAULT_APPEARANCE_DIM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Row {
    frame: usize,
    bbox: BBox,
    visibility: f64,
}

fn field<T: std::str::FromStr>(s: &str, line: usize, name: &str) -> SimResult<T> {
    s.trim().parse().map_err(|_| SimError::Parse { line, reason: format!("{name}: cannot parse {:?}", s.trim()) })
}

fn parse_rows(text: &str) -> SimResult<BTreeMap<ObjectId, Vec<Row>>> {
    let mut by_id: BTreeMap<ObjectId, Vec<Row>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split(',').collect();
        if cols.len() != 9 {
            return Err(SimError::Parse { line, reason: format!("expected 9 fields, found {}", cols.len()) });
        }
        let frame: usize = field(cols[0], line, "frame")?;
        if frame == 0 {
            return Err(SimError::Parse { line, reason: "frames are numbered from 1".into() });
        }
        let id: ObjectId = field(cols[1], line, "id")?;
        let x: f64 = field(cols[2], line, "x")?;
        let y: f64 = field(cols[3], line, "y")?;
        let w: f64 = field(cols[4], line, "w")?;
        let h: f64 = field(cols[5], line, "h")?;
        let _conf: f64 = field(cols[6], line, "conf")?;
        let _class: i64 = field(cols[7], line, "class")?;
        let visibility: f64 = field(cols[8], line, "visibility")?;
        if !(0.0..=1.0).contains(&visibility) {
            return Err(SimError::Parse { line, reason: format!("visibility {visibility} not in [0, 1]") });
        }
        let bbox = BBox::new(x, y, w, h).map_err(|e| SimError::Parse { line, reason: e.to_string() })?;
        let rows = by_id.entry(id).or_default();
        if rows.iter().any(|r| r.frame == frame - 1) {
            return Err(SimError::Parse { line, reason: format!("duplicate box for id {id} at frame {frame}") });
        }
        rows.push(Row { frame: frame - 1, bbox, visibility });
    }
    if by_id.is_empty() {
        return Err(SimError::Parse { line: 0, reason: "no annotations".into() });
    }
    Ok(by_id)
}

/// Fills missing frames between annotated ones by linear interpolation.
fn fill_gaps(id: ObjectId, rows: &mut Vec<Row>) -> SimResult<()> {
    rows.sort_by_key(|r| r.frame);
    let mut out = Vec::with_capacity(rows.len());
    for pair in rows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        out.push(a);
        let span = b.frame - a.frame;
        if span > 1 {
            log::warn!("id {id}: frames {}..{} missing, interpolating", a.frame + 2, b.frame);
            for k in 1..span {
                let s = k as f64 / span as f64;
                let lerp = |p: f64, q: f64| p + s * (q - p);
                let bbox = BBox::new(
                    lerp(a.bbox.x(), b.bbox.x()),
                    lerp(a.bbox.y(), b.bbox.y()),
                    lerp(a.bbox.w(), b.bbox.w()),
                    lerp(a.bbox.h(), b.bbox.h()),
                )?;
                out.push(Row { frame: a.frame + k, bbox, visibility: lerp(a.visibility, b.visibility) });
            }
        }
    }
    out.push(*rows.last().expect("non-empty"));
    *rows = out;
    Ok(())
}

/// Runs of equal reduced visibility become static occlusions.
fn occlusions(rows: &[Row]) -> Vec<Occlusion> {
    let mut out: Vec<Occlusion> = Vec::new();
    for r in rows {
        if r.visibility >= 1.0 {
            continue;
        }
        let severity = 1.0 - r.visibility;
        match out.last_mut() {
            Some(o) if o.end + 1 == r.frame && o.severity == severity => o.end = r.frame,
            _ => out.push(Occlusion { start: r.frame, end: r.frame, occluder: Occluder::Static, severity }),
        }
    }
    out
}

/// Builds a scene from MOT ground truth. Appearance vectors are random per
/// id, drawn from `seed`; the lowest id present in the first annotated frame
/// is the target.
pub fn parse_mot(text: &str, seed: u64) -> SimResult<Scene> {
    let mut by_id = parse_rows(text)?;
    let mut objects = Vec::with_capacity(by_id.len());
    let mut length = 0;
    let (mut bw, mut bh) = (0.0f64, 0.0f64);
    for (&id, rows) in by_id.iter_mut() {
        fill_gaps(id, rows)?;
        let first_frame = rows[0].frame;
        length = length.max(rows.last().expect("non-empty").frame + 1);
        for r in rows.iter() {
            bw = bw.max(r.bbox.right());
            bh = bh.max(r.bbox.bottom());
        }
        let mut rng = stream(seed, &[MOT_APPEARANCE, id as u64]);
        objects.push(ObjectSpec {
            id,
            trajectory: Trajectory::Track { first_frame, boxes: rows.iter().map(|r| r.bbox).collect() },
            appearance: random_unit(&mut rng, DEFAULT_APPEARANCE_DIM),
            drift: 0.0,
            drift_spikes: vec![],
            occlusions: occlusions(rows),
        });
    }
    let first = by_id.values().map(|r| r[0].frame).min().expect("non-empty");
    let target = by_id.iter().find(|(_, r)| r[0].frame == first).map(|(&id, _)| id).expect("non-empty");
    let scene = Scene { length, bounds: (bw, bh), seed, target, sensor: SensorModel::default(), objects };
    scene.validate()?;
    Ok(scene)
}

pub fn load_mot(path: &Path, seed: u64) -> SimResult<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_mot(&text, seed)
}

fn fmt_visibility(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Writes every object's boxes in frame-major, id-minor order, with
/// confidence and class set to 1.
pub fn write_mot(scene: &Scene) -> String {
    let mut ids: Vec<&ObjectSpec> = scene.objects.iter().collect();
    ids.sort_by_key(|o| o.id);
    let mut out = String::new();
    for f in 0..scene.length {
        for o in &ids {
            if let Some(b) = o.trajectory.box_at(f) {
                let vis = fmt_visibility(o.visibility(f));
                writeln!(out, "{},{},{},{},{},{},1,1,{}", f + 1, o.id, b.x(), b.y(), b.w(), b.h(), vis).expect("string write");
            }
        }
    }
    out
}
