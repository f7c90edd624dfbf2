//! Evaluation metrics for reconstructed marker sequences, the heuristic bone
//! lengths they rely on, and the masked position/velocity training loss.
//!
//! All distances are in centimeters. Ground-truth metrics compare a prediction
//! to clean data; `vd` and `bdp` judge the prediction alone and need no ground
//! truth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{norm_sq, sub, MarkerSequence, ObservationMask, PointGrid, SkeletonConfig, SkeletonIndex, Vec3};

/// How squared errors are averaged before the square root.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Mean over every scalar coordinate (`T·3M` entries).
    #[default]
    PerCoordinate,
    /// Mean of squared 3-vector norms over marker slots (`T·M` entries).
    PerMarker,
}

impl NormMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NormMode::PerCoordinate => "per_coordinate",
            NormMode::PerMarker => "per_marker",
        }
    }

    /// Number of averaged entries per marker slot.
    fn entries_per_slot(self) -> f64 {
        match self {
            NormMode::PerCoordinate => 3.0,
            NormMode::PerMarker => 1.0,
        }
    }
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_coordinate" => Ok(NormMode::PerCoordinate),
            "per_marker" => Ok(NormMode::PerMarker),
            other => Err(Error::InvalidArgument(format!("unknown norm mode {other:?}"))),
        }
    }
}

/// Bone lengths per frame, `T × D`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoneLengthSeries {
    pub names: Vec<String>,
    n_frames: usize,
    lengths: Vec<f64>,
}

impl BoneLengthSeries {
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bones(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.lengths[t * self.names.len() + d]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let d = self.names.len();
        &self.lengths[t * d..(t + 1) * d]
    }
}

fn centroid(grid: &PointGrid, t: usize, markers: &[usize]) -> Vec3 {
    let mut c = [0.0; 3];
    for &m in markers {
        let p = grid.get(t, m);
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    let n = markers.len() as f64;
    [c[0] / n, c[1] / n, c[2] / n]
}

pub fn bone_lengths(seq: &MarkerSequence, skel: &SkeletonConfig) -> Result<BoneLengthSeries> {
    let idx = skel.index_for(seq.marker_ids())?;
    bone_lengths_indexed(seq, &idx)
}

pub(crate) fn bone_lengths_indexed(seq: &MarkerSequence, idx: &SkeletonIndex) -> Result<BoneLengthSeries> {
    for bone in &idx.bones {
        for &m in bone.end_a.iter().chain(&bone.end_b) {
            if let Some(t) = (0..seq.n_frames()).find(|&t| !seq.is_present(t, m)) {
                return Err(Error::Missing(format!(
                    "bone {}: marker {} absent at frame {t}",
                    bone.name,
                    seq.marker_ids()[m]
                )));
            }
        }
    }
    let grid = seq.raw_positions();
    let mut lengths = Vec::with_capacity(seq.n_frames() * idx.bones.len());
    for t in 0..seq.n_frames() {
        for bone in &idx.bones {
            let a = centroid(grid, t, &bone.end_a);
            let b = centroid(grid, t, &bone.end_b);
            lengths.push(norm_sq(sub(a, b)).sqrt());
        }
    }
    Ok(BoneLengthSeries {
        names: idx.bones.iter().map(|b| b.name.clone()).collect(),
        n_frames: seq.n_frames(),
        lengths,
    })
}

fn check_pair(pred: &MarkerSequence, gt: &MarkerSequence) -> Result<()> {
    pred.same_shape(gt)?;
    if pred.marker_ids() != gt.marker_ids() {
        return Err(Error::Shape("prediction and ground truth have different marker ids".into()));
    }
    Ok(())
}

/// Root-mean-square position error. With `scope`, only entries the mask marks
/// missing are scored.
pub fn rmse(pred: &MarkerSequence, gt: &MarkerSequence, norm: NormMode, scope: Option<&ObservationMask>) -> Result<f64> {
    check_pair(pred, gt)?;
    if let Some(mask) = scope {
        mask.check_shape(pred)?;
    }
    let (p, g) = (pred.raw_positions(), gt.raw_positions());
    let mut sum = 0.0;
    let mut slots = 0usize;
    for t in 0..pred.n_frames() {
        for m in 0..pred.n_markers() {
            if scope.is_some_and(|mask| mask.is_observed(t, m)) {
                continue;
            }
            if !pred.is_present(t, m) || !gt.is_present(t, m) {
                return Err(Error::Missing(format!(
                    "marker {} absent at frame {t} in a scored entry",
                    pred.marker_ids()[m]
                )));
            }
            sum += norm_sq(sub(p.get(t, m), g.get(t, m)));
            slots += 1;
        }
    }
    if slots == 0 {
        return Err(Error::InvalidArgument("rmse scope contains no entries".into()));
    }
    Ok((sum / (slots as f64 * norm.entries_per_slot())).sqrt())
}

fn rms_grid(a: &PointGrid, b: Option<&PointGrid>, norm: NormMode) -> f64 {
    let mut sum = 0.0;
    for (i, p) in a.as_slice().iter().enumerate() {
        let d = match b {
            Some(b) => sub(*p, b.as_slice()[i]),
            None => *p,
        };
        sum += norm_sq(d);
    }
    (sum / (a.as_slice().len() as f64 * norm.entries_per_slot())).sqrt()
}

/// Velocity distance to ground truth: RMS of `v_t - v̂_t` over `T-1` frames.
pub fn vd_gt(pred: &MarkerSequence, gt: &MarkerSequence, norm: NormMode) -> Result<f64> {
    check_pair(pred, gt)?;
    let vp = pred.velocity()?;
    let vg = gt.velocity()?;
    Ok(rms_grid(&vp, Some(&vg), norm))
}

/// Velocity distance without ground truth: RMS of `v̂_{t+1} - v̂_t` over `T-2` frames.
pub fn vd(pred: &MarkerSequence, norm: NormMode) -> Result<f64> {
    if pred.n_frames() < 3 {
        return Err(Error::Shape("vd needs at least 3 frames".into()));
    }
    let v = pred.velocity()?;
    let acc = PointGrid::from_fn(v.n_frames() - 1, v.n_markers(), |t, m| sub(v.get(t + 1, m), v.get(t, m)));
    Ok(rms_grid(&acc, None, norm))
}

/// Bone distance preservation against ground truth: RMS of `L_td - L̂_td`.
pub fn bdp_gt(pred: &MarkerSequence, gt: &MarkerSequence, skel: &SkeletonConfig) -> Result<f64> {
    check_pair(pred, gt)?;
    let idx = skel.index_for(pred.marker_ids())?;
    if idx.bones.is_empty() {
        return Err(Error::Skeleton("no bones defined".into()));
    }
    let lp = bone_lengths_indexed(pred, &idx)?;
    let lg = bone_lengths_indexed(gt, &idx)?;
    let sum: f64 = lp.lengths.iter().zip(&lg.lengths).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sum / lp.lengths.len() as f64).sqrt())
}

/// Bone distance preservation across frames: RMS of `L̂_{t+1,d} - L̂_td`.
pub fn bdp(pred: &MarkerSequence, skel: &SkeletonConfig) -> Result<f64> {
    if pred.n_frames() < 2 {
        return Err(Error::Shape("bdp needs at least 2 frames".into()));
    }
    let idx = skel.index_for(pred.marker_ids())?;
    if idx.bones.is_empty() {
        return Err(Error::Skeleton("no bones defined".into()));
    }
    let l = bone_lengths_indexed(pred, &idx)?;
    let d = l.n_bones();
    let sum: f64 = (0..l.n_frames - 1)
        .flat_map(|t| (0..d).map(move |k| (t, k)))
        .map(|(t, k)| (l.get(t + 1, k) - l.get(t, k)).powi(2))
        .sum();
    Ok((sum / ((l.n_frames - 1) * d) as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub position: f64,
    pub velocity: f64,
}

/// `(1/T) Σ_t ‖m_t ⊙ (y_t - ŷ_t)‖² + λ (1/(T-1)) Σ_{t≥1} ‖m_t ⊙ (v_t - v̂_t)‖²`
/// where `m_t` selects the coordinates of markers missing at frame `t`.
pub fn training_loss(pred: &MarkerSequence, gt: &MarkerSequence, mask: &ObservationMask, lambda: f64) -> Result<LossBreakdown> {
    check_pair(pred, gt)?;
    mask.check_shape(pred)?;
    if pred.n_frames() < 2 {
        return Err(Error::Shape("training loss needs at least 2 frames".into()));
    }
    let p = pred.full_positions()?;
    let g = gt.full_positions()?;
    let t_len = p.n_frames();
    let mut pos = 0.0;
    let mut vel = 0.0;
    for t in 0..t_len {
        for m in 0..p.n_markers() {
            if mask.is_observed(t, m) {
                continue;
            }
            pos += norm_sq(sub(p.get(t, m), g.get(t, m)));
            if t >= 1 {
                let vp = sub(p.get(t, m), p.get(t - 1, m));
                let vg = sub(g.get(t, m), g.get(t - 1, m));
                vel += norm_sq(sub(vg, vp));
            }
        }
    }
    let position = pos / t_len as f64;
    let velocity = vel / (t_len - 1) as f64;
    Ok(LossBreakdown {
        total: position + lambda * velocity,
        position,
        velocity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoneDef, MarkerDef};
    use std::collections::BTreeMap;

    fn ids(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("A1:M{i}")).collect()
    }

    fn seq(t: usize, m: usize, f: impl FnMut(usize, usize) -> Vec3) -> MarkerSequence {
        MarkerSequence::from_full(PointGrid::from_fn(t, m, f), ids(m), 120.0).unwrap()
    }

    fn two_pair_bone() -> SkeletonConfig {
        let ids = ids(4);
        let mut hips = BTreeMap::new();
        hips.insert("A1".to_string(), vec![ids[0].clone()]);
        SkeletonConfig::new(
            vec!["A1".into()],
            ids.iter().map(|id| MarkerDef { id: id.clone(), actor: "A1".into() }).collect(),
            hips,
            [ids.clone(), vec![], vec![], vec![]],
            vec![BoneDef { name: "b".into(), end_a: ids[..2].to_vec(), end_b: ids[2..].to_vec() }],
            vec![],
            vec![],
            None,
        )
        .unwrap()
    }

    #[test]
    fn bone_length_uses_endpoint_centroids() {
        let pts = [[0.0, 0.0, 0.0], [0.0, 2.0, 0.0], [10.0, 0.0, 0.0], [10.0, 2.0, 0.0]];
        let s = seq(2, 4, |_, m| pts[m]);
        let l = bone_lengths(&s, &two_pair_bone()).unwrap();
        assert_eq!(l.get(0, 0), 10.0);
        assert_eq!(l.get(1, 0), 10.0);

        let coincident = seq(2, 4, |_, _| [1.0, 1.0, 1.0]);
        assert_eq!(bone_lengths(&coincident, &two_pair_bone()).unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn bone_lengths_constant_under_rotation() {
        let pts = [[0.0, 0.0, 0.0], [0.0, 2.0, 1.0], [10.0, 0.0, 3.0], [10.0, 2.0, -1.0]];
        let s = seq(30, 4, |t, m| {
            let a = t as f64 * 0.2;
            let (c, sn) = (a.cos(), a.sin());
            let p = pts[m];
            [c * p[0] - sn * p[1] + t as f64, sn * p[0] + c * p[1], p[2]]
        });
        let skel = two_pair_bone();
        let l = bone_lengths(&s, &skel).unwrap();
        for t in 1..30 {
            assert!((l.get(t, 0) - l.get(0, 0)).abs() < 1e-12);
        }
        assert!(bdp(&s, &skel).unwrap() < 1e-12);
    }

    #[test]
    fn bone_length_reports_absent_marker() {
        let s = seq(3, 4, |_, _| [0.0; 3]);
        let mut present = vec![true; 12];
        present[2 * 4 + 3] = false;
        let e = bone_lengths(&s.with_presence(present).unwrap(), &two_pair_bone()).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bone b") && msg.contains("frame 2"), "{msg}");
    }

    #[test]
    fn rmse_examples() {
        let gt = seq(4, 2, |t, m| [t as f64, m as f64, 0.0]);
        assert_eq!(rmse(&gt, &gt, NormMode::PerCoordinate, None).unwrap(), 0.0);

        let mut off = gt.full_positions().unwrap().clone();
        off.get_mut(2, 1)[0] += 3.0;
        let pred = gt.with_positions(off).unwrap();
        let k = (4 * 2 * 3) as f64;
        assert!((rmse(&pred, &gt, NormMode::PerCoordinate, None).unwrap() - 3.0 / k.sqrt()).abs() < 1e-12);
        let slots = (4 * 2) as f64;
        assert!((rmse(&pred, &gt, NormMode::PerMarker, None).unwrap() - 3.0 / slots.sqrt()).abs() < 1e-12);

        // scoped to one missing marker slot: K = 3 coordinates
        let mut scope = ObservationMask::all_observed(4, 2);
        scope.set(2, 1, false);
        assert!((rmse(&pred, &gt, NormMode::PerCoordinate, Some(&scope)).unwrap() - 3.0 / 3f64.sqrt()).abs() < 1e-12);
        let empty = ObservationMask::all_observed(4, 2);
        assert!(rmse(&pred, &gt, NormMode::PerCoordinate, Some(&empty)).is_err());

        let short = seq(3, 2, |_, _| [0.0; 3]);
        assert!(matches!(rmse(&short, &gt, NormMode::PerCoordinate, None), Err(Error::Shape(_))));
    }

    #[test]
    fn velocity_distances() {
        let gt = seq(6, 2, |t, m| [(t * t) as f64, m as f64, 1.0]);
        assert_eq!(vd_gt(&gt, &gt, NormMode::PerCoordinate).unwrap(), 0.0);
        let linear = seq(6, 2, |t, m| [3.0 * t as f64, -(t as f64), m as f64]);
        assert_eq!(vd(&linear, NormMode::PerCoordinate).unwrap(), 0.0);
        // second difference of t^2 is 2 in x only: per-coordinate mean 4/3
        assert!((vd(&gt, NormMode::PerCoordinate).unwrap() - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((vd(&gt, NormMode::PerMarker).unwrap() - 2.0).abs() < 1e-12);
        assert!(vd(&seq(2, 1, |_, _| [0.0; 3]), NormMode::PerCoordinate).is_err());
    }

    #[test]
    fn loss_hand_example() {
        let gt = seq(2, 1, |_, _| [0.0; 3]);
        let pred = seq(2, 1, |t, _| if t == 1 { [1.0, 0.0, 0.0] } else { [0.0; 3] });
        let mut mask = ObservationMask::all_observed(2, 1);
        mask.set(1, 0, false);
        let l = training_loss(&pred, &gt, &mask, 1.0).unwrap();
        assert_eq!(l.position, 0.5);
        assert_eq!(l.velocity, 1.0);
        assert_eq!(l.total, 1.5);

        let all = ObservationMask::all_observed(2, 1);
        assert_eq!(training_loss(&pred, &gt, &all, 1.0).unwrap().total, 0.0);
        assert_eq!(training_loss(&gt, &gt, &mask, 1.0).unwrap().total, 0.0);
    }
}
