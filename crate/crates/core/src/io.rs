//! File formats (marker, mask, ratings and metrics CSV; skeleton JSON) and
//! dataset preprocessing: hips-centering and augmentation.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::NormMode;
use crate::model::{
    add, sub, BodyPart, BoneDef, MarkerDef, MarkerSequence, MetricName, MetricReport, MetricRow,
    ObservationMask, PointGrid, Rating, RatingsTable, SkeletonConfig, Vec3,
};

/// Write `bytes` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

// ---------------------------------------------------------------------------
// Marker CSV
// ---------------------------------------------------------------------------

pub fn read_markers(path: &Path, fps_override: Option<f64>) -> Result<MarkerSequence> {
    parse_markers(&read_to_string(path)?, path, fps_override)
}

/// Parse Marker CSV text. `origin` only labels errors.
pub fn parse_markers(text: &str, origin: impl AsRef<Path>, fps_override: Option<f64>) -> Result<MarkerSequence> {
    let origin = origin.as_ref();
    let perr = |line: u64, msg: String| Error::parse(origin, line, msg);
    let mut rdr = csv_reader(text);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| perr(1, e.to_string()))?,
        None => return Err(perr(1, "empty file".into())),
    };
    if header.len() < 5 || &header[0] != "frame" || &header[1] != "time" || (header.len() - 2) % 3 != 0 {
        return Err(perr(
            1,
            "header must be `frame,time` followed by `<marker>:x,<marker>:y,<marker>:z` triples".into(),
        ));
    }
    let mut marker_ids = Vec::new();
    for k in 0..(header.len() - 2) / 3 {
        let mut id = None;
        for (c, axis) in ["x", "y", "z"].iter().enumerate() {
            let col = &header[2 + 3 * k + c];
            let (name, ax) = col
                .rsplit_once(':')
                .ok_or_else(|| perr(1, format!("column {col:?} lacks a `:<axis>` suffix")))?;
            if ax != *axis || name.is_empty() {
                return Err(perr(1, format!("column {col:?}: expected axis `{axis}`")));
            }
            match id {
                None => id = Some(name),
                Some(prev) if prev != name => {
                    return Err(perr(1, format!("column {col:?} breaks the triple for marker {prev:?}")))
                }
                _ => {}
            }
        }
        let id = id.unwrap_or_default().to_string();
        if marker_ids.contains(&id) {
            return Err(perr(1, format!("duplicate marker {id:?}")));
        }
        marker_ids.push(id);
    }

    let m = marker_ids.len();
    let mut data: Vec<Vec3> = Vec::new();
    let mut present = Vec::new();
    let mut times = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(perr(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let frame: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| perr(line, format!("frame {:?} is not a non-negative integer", &rec[0])))?;
        if frame != times.len() {
            return Err(perr(line, format!("expected frame {}, found {frame}", times.len())));
        }
        let time: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| perr(line, format!("time {:?} is not a number", &rec[1])))?;
        if !time.is_finite() {
            return Err(perr(line, "non-finite time".into()));
        }
        if let Some(&prev) = times.last() {
            if time <= prev {
                return Err(perr(line, format!("time {time} not after previous {prev}")));
            }
        }
        times.push(time);
        for k in 0..m {
            let cells = [&rec[2 + 3 * k], &rec[3 + 3 * k], &rec[4 + 3 * k]];
            let empty = cells.iter().filter(|c| c.trim().is_empty()).count();
            match empty {
                3 => {
                    data.push([0.0; 3]);
                    present.push(false);
                }
                0 => {
                    let mut p: Vec3 = [0.0; 3];
                    for (c, cell) in cells.iter().enumerate() {
                        p[c] = cell.trim().parse().map_err(|_| {
                            perr(line, format!("marker {}: {cell:?} is not a number", marker_ids[k]))
                        })?;
                        if !p[c].is_finite() {
                            return Err(perr(line, format!("marker {}: non-finite value", marker_ids[k])));
                        }
                    }
                    data.push(p);
                    present.push(true);
                }
                _ => {
                    return Err(perr(
                        line,
                        format!("marker {} has a partially empty coordinate triple", marker_ids[k]),
                    ))
                }
            }
        }
    }
    if times.is_empty() {
        return Err(perr(2, "no frames".into()));
    }

    let fps = match fps_override {
        Some(f) => f,
        None if times.len() >= 2 => infer_fps(&times),
        None => {
            return Err(perr(
                2,
                "a single frame cannot determine the frame rate; pass an fps override".into(),
            ))
        }
    };
    let grid = PointGrid::from_vec(times.len(), m, data)?;
    MarkerSequence::new(grid, present, marker_ids, fps).map_err(|e| e.context(origin.display().to_string()))
}

/// Mean rate over the time column, snapped to an integer when within 1 ppm.
fn infer_fps(times: &[f64]) -> f64 {
    let span = times[times.len() - 1] - times[0];
    let fps = (times.len() - 1) as f64 / span;
    let snapped = fps.round();
    if (fps - snapped).abs() <= 1e-6 * fps {
        snapped
    } else {
        fps
    }
}

pub fn markers_to_string(seq: &MarkerSequence) -> String {
    let m = seq.n_markers();
    let mut out = String::with_capacity(seq.n_frames() * (m * 30 + 16));
    out.push_str("frame,time");
    for id in seq.marker_ids() {
        for axis in ["x", "y", "z"] {
            out.push(',');
            out.push_str(id);
            out.push(':');
            out.push_str(axis);
        }
    }
    out.push('\n');
    for t in 0..seq.n_frames() {
        out.push_str(&format!("{t},{}", t as f64 / seq.fps()));
        for k in 0..m {
            match seq.get(t, k) {
                Some(p) => out.push_str(&format!(",{},{},{}", p[0], p[1], p[2])),
                None => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_markers(seq: &MarkerSequence, path: &Path) -> Result<()> {
    atomic_write(path, markers_to_string(seq).as_bytes())
}

// ---------------------------------------------------------------------------
// Mask CSV
// ---------------------------------------------------------------------------

pub fn mask_to_string(mask: &ObservationMask, marker_ids: &[String]) -> Result<String> {
    if marker_ids.len() != mask.n_markers() {
        return Err(Error::Shape("mask marker count does not match ids".into()));
    }
    let mut out = String::from("frame");
    for id in marker_ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for t in 0..mask.n_frames() {
        out.push_str(&t.to_string());
        for m in 0..mask.n_markers() {
            out.push_str(if mask.is_observed(t, m) { ",1" } else { ",0" });
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_mask(mask: &ObservationMask, marker_ids: &[String], path: &Path) -> Result<()> {
    atomic_write(path, mask_to_string(mask, marker_ids)?.as_bytes())
}

/// Returns the mask and its marker ids (header order).
pub fn read_mask(path: &Path) -> Result<(ObservationMask, Vec<String>)> {
    parse_mask(&read_to_string(path)?, path)
}

pub fn parse_mask(text: &str, origin: impl AsRef<Path>) -> Result<(ObservationMask, Vec<String>)> {
    let origin = origin.as_ref();
    let perr = |line: u64, msg: String| Error::parse(origin, line, msg);
    let mut rdr = csv_reader(text);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| perr(1, e.to_string()))?,
        None => return Err(perr(1, "empty file".into())),
    };
    if header.len() < 2 || &header[0] != "frame" {
        return Err(perr(1, "header must be `frame,<marker>...`".into()));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut bits = Vec::new();
    let mut n_frames = 0;
    for rec in records {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&rec);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(perr(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        if rec[0].trim().parse::<usize>().ok() != Some(n_frames) {
            return Err(perr(line, format!("expected frame {n_frames}, found {:?}", &rec[0])));
        }
        for cell in rec.iter().skip(1) {
            bits.push(match cell.trim() {
                "1" => true,
                "0" => false,
                other => return Err(perr(line, format!("mask cell {other:?} is not 0 or 1"))),
            });
        }
        n_frames += 1;
    }
    let n_markers = ids.len();
    Ok((ObservationMask::from_bits(n_frames, n_markers, bits)?, ids))
}

// ---------------------------------------------------------------------------
// Skeleton JSON
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonFile {
    actors: Vec<String>,
    markers: Vec<MarkerDef>,
    hip_markers: BTreeMap<String, Vec<String>>,
    body_parts: BTreeMap<String, Vec<String>>,
    bones: Vec<BoneDef>,
    mirror_pairs_x: Vec<[String; 2]>,
    mirror_pairs_y: Vec<[String; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rest_pose: Option<BTreeMap<String, Vec3>>,
}

pub fn read_skeleton(path: &Path) -> Result<SkeletonConfig> {
    parse_skeleton_json(&read_to_string(path)?, path)
}

pub fn parse_skeleton_json(text: &str, origin: impl AsRef<Path>) -> Result<SkeletonConfig> {
    let origin = origin.as_ref();
    let file: SkeletonFile =
        serde_json::from_str(text).map_err(|e| Error::parse(origin, e.line() as u64, e.to_string()))?;
    let mut parts = file.body_parts;
    let mut ordered: [Vec<String>; 4] = Default::default();
    for part in BodyPart::ALL {
        ordered[part.index()] = parts
            .remove(part.as_str())
            .ok_or_else(|| Error::Skeleton(format!("missing body part `{part}`")))?;
    }
    if let Some(extra) = parts.keys().next() {
        return Err(Error::Skeleton(format!("unknown body part `{extra}`")));
    }
    let pairs = |v: Vec<[String; 2]>| v.into_iter().map(|[a, b]| (a, b)).collect();
    SkeletonConfig::new(
        file.actors,
        file.markers,
        file.hip_markers,
        ordered,
        file.bones,
        pairs(file.mirror_pairs_x),
        pairs(file.mirror_pairs_y),
        file.rest_pose,
    )
}

pub fn skeleton_to_json(skel: &SkeletonConfig) -> String {
    let pairs = |v: &[(String, String)]| v.iter().map(|(a, b)| [a.clone(), b.clone()]).collect();
    let file = SkeletonFile {
        actors: skel.actors.clone(),
        markers: skel.markers.clone(),
        hip_markers: skel.hip_markers.clone(),
        body_parts: BodyPart::ALL
            .iter()
            .map(|p| (p.as_str().to_string(), skel.part(*p).to_vec()))
            .collect(),
        bones: skel.bones.clone(),
        mirror_pairs_x: pairs(&skel.mirror_pairs_x),
        mirror_pairs_y: pairs(&skel.mirror_pairs_y),
        rest_pose: skel.rest_pose.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("skeleton serializes");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Ratings and metrics CSV
// ---------------------------------------------------------------------------

pub fn read_ratings(path: &Path) -> Result<RatingsTable> {
    parse_ratings(&read_to_string(path)?, path)
}

pub fn parse_ratings(text: &str, origin: impl AsRef<Path>) -> Result<RatingsTable> {
    let origin = origin.as_ref();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::parse(origin, 1, e.to_string()))?;
    if header != vec!["stimulus_id", "rater_id", "rating"] {
        return Err(Error::parse(origin, 1, "header must be `stimulus_id,rater_id,rating`"));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<Rating>() {
        let r = rec.map_err(|e| Error::parse(origin, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        rows.push(r);
    }
    RatingsTable::new(rows).map_err(|e| e.context(origin.display().to_string()))
}

pub fn ratings_to_string(table: &RatingsTable) -> String {
    let mut out = String::from("stimulus_id,rater_id,rating\n");
    for r in table.rows() {
        out.push_str(&format!("{},{},{}\n", r.stimulus_id, r.rater_id, r.rating));
    }
    out
}

pub fn read_metrics(path: &Path) -> Result<MetricReport> {
    parse_metrics(&read_to_string(path)?, path)
}

pub fn parse_metrics(text: &str, origin: impl AsRef<Path>) -> Result<MetricReport> {
    let origin = origin.as_ref();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::parse(origin, 1, e.to_string()))?;
    if header != vec!["stimulus_id", "metric", "value", "norm_mode"] {
        return Err(Error::parse(origin, 1, "header must be `stimulus_id,metric,value,norm_mode`"));
    }
    let mut report = MetricReport::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(origin, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&rec);
        let metric: MetricName = rec[1].parse().map_err(|e: Error| Error::parse(origin, line, e.to_string()))?;
        let value: f64 = rec[2]
            .parse()
            .map_err(|_| Error::parse(origin, line, format!("value {:?} is not a number", &rec[2])))?;
        let norm: NormMode = rec[3].parse().map_err(|e: Error| Error::parse(origin, line, e.to_string()))?;
        report
            .push(MetricRow {
                stimulus_id: rec[0].to_string(),
                metric,
                value,
                norm,
            })
            .map_err(|e| Error::parse(origin, line, e.to_string()))?;
    }
    Ok(report)
}

pub fn metrics_to_string(report: &MetricReport) -> String {
    let mut out = String::from("stimulus_id,metric,value,norm_mode\n");
    for r in report.rows() {
        out.push_str(&format!("{},{},{},{}\n", r.stimulus_id, r.metric, r.value, r.norm));
    }
    out
}

// ---------------------------------------------------------------------------
// Hips-centering
// ---------------------------------------------------------------------------

/// A sequence with every actor's hip centroid moved to the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredSequence {
    pub seq: MarkerSequence,
    /// Hip center of the second actor minus that of the first, per frame
    /// (all zero for a single actor).
    pub actor_offset: Vec<Vec3>,
    /// Absolute hip center per actor and frame, kept for [`decenter`].
    pub hip_centers: Vec<Vec<Vec3>>,
}

pub fn center_hips(seq: &MarkerSequence, skel: &SkeletonConfig) -> Result<CenteredSequence> {
    let idx = skel.index_for(seq.marker_ids())?;
    let t_len = seq.n_frames();
    let mut hip_centers = vec![vec![[0.0; 3]; t_len]; idx.n_actors];
    for (hips, centers) in idx.hips.iter().zip(hip_centers.iter_mut()) {
        for (t, center) in centers.iter_mut().enumerate() {
            let mut c = [0.0; 3];
            for &h in hips {
                let p = seq.get(t, h).ok_or_else(|| {
                    Error::Missing(format!(
                        "hip marker {} absent at frame {t}; fill hips before centering",
                        seq.marker_ids()[h]
                    ))
                })?;
                c = add(c, p);
            }
            let n = hips.len() as f64;
            *center = [c[0] / n, c[1] / n, c[2] / n];
        }
    }
    let raw = seq.raw_positions();
    let grid = PointGrid::from_fn(t_len, seq.n_markers(), |t, m| {
        sub(raw.get(t, m), hip_centers[idx.actor_of[m]][t])
    });
    let actor_offset = (0..t_len)
        .map(|t| {
            if idx.n_actors >= 2 {
                sub(hip_centers[1][t], hip_centers[0][t])
            } else {
                [0.0; 3]
            }
        })
        .collect();
    Ok(CenteredSequence {
        seq: seq.with_positions(grid)?,
        actor_offset,
        hip_centers,
    })
}

/// Inverse of [`center_hips`]; also applies to a centered sequence whose
/// positions were modified (e.g. by a reconstructor).
pub fn decenter(centered: &CenteredSequence, skel: &SkeletonConfig) -> Result<MarkerSequence> {
    let seq = &centered.seq;
    let idx = skel.index_for(seq.marker_ids())?;
    if centered.hip_centers.len() != idx.n_actors
        || centered.hip_centers.iter().any(|c| c.len() != seq.n_frames())
    {
        return Err(Error::Shape("hip centers do not match sequence".into()));
    }
    let raw = seq.raw_positions();
    let grid = PointGrid::from_fn(seq.n_frames(), seq.n_markers(), |t, m| {
        add(raw.get(t, m), centered.hip_centers[idx.actor_of[m]][t])
    });
    seq.with_positions(grid)
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Augmentation {
    MirrorX,
    MirrorY,
    SwapActors,
}

/// Mirror along x or y (swapping left/right labels), or swap two actors.
/// Every mode is an involution.
pub fn augment(seq: &MarkerSequence, skel: &SkeletonConfig, mode: Augmentation) -> Result<MarkerSequence> {
    let idx = skel.index_for(seq.marker_ids())?;
    let (perm, axis) = match mode {
        Augmentation::MirrorX => (pair_permutation(seq.n_markers(), &idx.mirror_x), Some(0)),
        Augmentation::MirrorY => (pair_permutation(seq.n_markers(), &idx.mirror_y), Some(1)),
        Augmentation::SwapActors => (actor_swap_permutation(seq, skel)?, None),
    };
    let raw = seq.raw_positions();
    let grid = PointGrid::from_fn(seq.n_frames(), seq.n_markers(), |t, m| {
        let mut p = raw.get(t, perm[m]);
        if let Some(ax) = axis {
            p[ax] = -p[ax];
        }
        p
    });
    let m_count = seq.n_markers();
    let present = (0..seq.n_frames() * m_count)
        .map(|i| seq.presence()[(i / m_count) * m_count + perm[i % m_count]])
        .collect();
    MarkerSequence::new(grid, present, seq.marker_ids().to_vec(), seq.fps())
}

fn pair_permutation(m: usize, pairs: &[(usize, usize)]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..m).collect();
    for &(a, b) in pairs {
        perm[a] = b;
        perm[b] = a;
    }
    perm
}

fn actor_swap_permutation(seq: &MarkerSequence, skel: &SkeletonConfig) -> Result<Vec<usize>> {
    if skel.actors.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "actor swap needs exactly 2 actors, skeleton has {}",
            skel.actors.len()
        )));
    }
    let mut by_actor: [HashMap<&str, &str>; 2] = Default::default();
    for m in &skel.markers {
        let a = usize::from(m.actor != skel.actors[0]);
        by_actor[a].insert(skel.local_name(m), m.id.as_str());
    }
    if by_actor[0].len() != by_actor[1].len() || by_actor[0].keys().any(|k| !by_actor[1].contains_key(k)) {
        return Err(Error::InvalidArgument("actors do not share a marker layout".into()));
    }
    let mut perm: Vec<usize> = (0..seq.n_markers()).collect();
    for (name, id0) in &by_actor[0] {
        let i0 = seq
            .marker_index(id0)
            .ok_or_else(|| Error::Skeleton(format!("marker {id0} not in sequence")))?;
        let id1 = by_actor[1][name];
        let i1 = seq
            .marker_index(id1)
            .ok_or_else(|| Error::Skeleton(format!("marker {id1} not in sequence")))?;
        perm[i0] = i1;
        perm[i1] = i0;
    }
    Ok(perm)
}
