//! Shared data model: marker sequences, observation masks, skeleton layout,
//! training schedule parameters, ratings and metric reports.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::NormMode;

pub type Vec3 = [f64; 3];

/// Dense `T × M` grid of 3D points, frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointGrid {
    n_frames: usize,
    n_markers: usize,
    data: Vec<Vec3>,
}

impl PointGrid {
    pub fn zeros(n_frames: usize, n_markers: usize) -> Self {
        Self {
            n_frames,
            n_markers,
            data: vec![[0.0; 3]; n_frames * n_markers],
        }
    }

    pub fn from_fn(n_frames: usize, n_markers: usize, mut f: impl FnMut(usize, usize) -> Vec3) -> Self {
        let mut data = Vec::with_capacity(n_frames * n_markers);
        for t in 0..n_frames {
            for m in 0..n_markers {
                data.push(f(t, m));
            }
        }
        Self {
            n_frames,
            n_markers,
            data,
        }
    }

    pub fn from_vec(n_frames: usize, n_markers: usize, data: Vec<Vec3>) -> Result<Self> {
        if data.len() != n_frames * n_markers {
            return Err(Error::Shape(format!(
                "expected {} points for {n_frames}x{n_markers}, got {}",
                n_frames * n_markers,
                data.len()
            )));
        }
        Ok(Self {
            n_frames,
            n_markers,
            data,
        })
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    #[inline]
    pub fn n_markers(&self) -> usize {
        self.n_markers
    }

    #[inline]
    pub fn get(&self, t: usize, m: usize) -> Vec3 {
        self.data[t * self.n_markers + m]
    }

    #[inline]
    pub fn get_mut(&mut self, t: usize, m: usize) -> &mut Vec3 {
        &mut self.data[t * self.n_markers + m]
    }

    #[inline]
    pub fn set(&mut self, t: usize, m: usize, p: Vec3) {
        self.data[t * self.n_markers + m] = p;
    }

    pub fn frame(&self, t: usize) -> &[Vec3] {
        &self.data[t * self.n_markers..(t + 1) * self.n_markers]
    }

    pub fn as_slice(&self) -> &[Vec3] {
        &self.data
    }
}

/// Marker positions in centimeters at a fixed frame rate, with a per-marker,
/// per-frame presence flag. Values behind `present == false` are never exposed.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkerSequence {
    positions: PointGrid,
    present: Vec<bool>,
    marker_ids: Vec<String>,
    fps: f64,
}

impl MarkerSequence {
    pub fn new(positions: PointGrid, present: Vec<bool>, marker_ids: Vec<String>, fps: f64) -> Result<Self> {
        let (t, m) = (positions.n_frames(), positions.n_markers());
        if t == 0 || m == 0 {
            return Err(Error::Shape(format!("sequence must have frames and markers, got {t}x{m}")));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidArgument(format!("fps must be positive, got {fps}")));
        }
        if present.len() != t * m {
            return Err(Error::Shape(format!(
                "presence has {} entries, expected {}",
                present.len(),
                t * m
            )));
        }
        if marker_ids.len() != m {
            return Err(Error::Shape(format!("{} marker ids for {m} markers", marker_ids.len())));
        }
        let mut seen = HashSet::new();
        for id in &marker_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate marker id {id:?}")));
            }
        }
        let mut positions = positions;
        for (i, p) in positions.data.iter_mut().enumerate() {
            if present[i] {
                if p.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "non-finite position for marker {} at frame {}",
                        marker_ids[i % m],
                        i / m
                    )));
                }
            } else {
                *p = [0.0; 3];
            }
        }
        Ok(Self {
            positions,
            present,
            marker_ids,
            fps,
        })
    }

    /// Fully-present sequence.
    pub fn from_full(positions: PointGrid, marker_ids: Vec<String>, fps: f64) -> Result<Self> {
        let n = positions.n_frames() * positions.n_markers();
        Self::new(positions, vec![true; n], marker_ids, fps)
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.positions.n_frames()
    }

    #[inline]
    pub fn n_markers(&self) -> usize {
        self.positions.n_markers()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn marker_ids(&self) -> &[String] {
        &self.marker_ids
    }

    pub fn marker_index(&self, id: &str) -> Option<usize> {
        self.marker_ids.iter().position(|m| m == id)
    }

    #[inline]
    pub fn is_present(&self, t: usize, m: usize) -> bool {
        self.present[t * self.n_markers() + m]
    }

    pub fn presence(&self) -> &[bool] {
        &self.present
    }

    #[inline]
    pub fn get(&self, t: usize, m: usize) -> Option<Vec3> {
        self.is_present(t, m).then(|| self.positions.get(t, m))
    }

    pub fn is_fully_present(&self) -> bool {
        self.present.iter().all(|&p| p)
    }

    pub fn present_count(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    /// Borrow the position grid, failing if any entry is absent.
    pub fn full_positions(&self) -> Result<&PointGrid> {
        if let Some(i) = self.present.iter().position(|&p| !p) {
            let m = self.n_markers();
            return Err(Error::Missing(format!(
                "marker {} absent at frame {}",
                self.marker_ids[i % m],
                i / m
            )));
        }
        Ok(&self.positions)
    }

    /// Positions including the zero placeholders behind absent entries.
    /// Only for code that consults `presence` itself.
    pub(crate) fn raw_positions(&self) -> &PointGrid {
        &self.positions
    }

    /// Copy with new positions and the same ids, fps and presence.
    pub fn with_positions(&self, positions: PointGrid) -> Result<Self> {
        if positions.n_frames() != self.n_frames() || positions.n_markers() != self.n_markers() {
            return Err(Error::Shape("position grid does not match sequence".into()));
        }
        Self::new(positions, self.present.clone(), self.marker_ids.clone(), self.fps)
    }

    pub fn with_presence(&self, present: Vec<bool>) -> Result<Self> {
        Self::new(self.positions.clone(), present, self.marker_ids.clone(), self.fps)
    }

    pub fn same_shape(&self, other: &MarkerSequence) -> Result<()> {
        if self.n_frames() != other.n_frames() || self.n_markers() != other.n_markers() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.n_frames(),
                self.n_markers(),
                other.n_frames(),
                other.n_markers()
            )));
        }
        Ok(())
    }

    /// `T × 3M` matrix with marker-major columns `m0x, m0y, m0z, m1x, ...`.
    pub fn flatten(&self) -> Result<DMatrix<f64>> {
        let grid = self.full_positions()?;
        let (t, m) = (grid.n_frames(), grid.n_markers());
        Ok(DMatrix::from_fn(t, 3 * m, |r, c| grid.get(r, c / 3)[c % 3]))
    }

    pub fn unflatten(matrix: &DMatrix<f64>, marker_ids: Vec<String>, fps: f64) -> Result<Self> {
        if !matrix.ncols().is_multiple_of(3) || matrix.ncols() / 3 != marker_ids.len() {
            return Err(Error::Shape(format!(
                "{} columns cannot hold {} markers",
                matrix.ncols(),
                marker_ids.len()
            )));
        }
        let m = marker_ids.len();
        let grid = PointGrid::from_fn(matrix.nrows(), m, |t, k| {
            [matrix[(t, 3 * k)], matrix[(t, 3 * k + 1)], matrix[(t, 3 * k + 2)]]
        });
        Self::from_full(grid, marker_ids, fps)
    }

    /// First differences `frames[t+1] - frames[t]`, in cm per frame.
    pub fn velocity(&self) -> Result<PointGrid> {
        if self.n_frames() < 2 {
            return Err(Error::Shape("velocity needs at least 2 frames".into()));
        }
        let grid = self.full_positions()?;
        Ok(PointGrid::from_fn(grid.n_frames() - 1, grid.n_markers(), |t, m| {
            sub(grid.get(t + 1, m), grid.get(t, m))
        }))
    }
}

#[inline]
pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn norm_sq(a: Vec3) -> f64 {
    a[0] * a[0] + a[1] * a[1] + a[2] * a[2]
}

/// `T × M` observation mask; `true` means observed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationMask {
    n_frames: usize,
    n_markers: usize,
    bits: Vec<bool>,
}

impl ObservationMask {
    pub fn all_observed(n_frames: usize, n_markers: usize) -> Self {
        Self {
            n_frames,
            n_markers,
            bits: vec![true; n_frames * n_markers],
        }
    }

    pub fn from_bits(n_frames: usize, n_markers: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != n_frames * n_markers {
            return Err(Error::Shape(format!(
                "mask has {} bits, expected {}",
                bits.len(),
                n_frames * n_markers
            )));
        }
        Ok(Self {
            n_frames,
            n_markers,
            bits,
        })
    }

    /// Observed wherever the sequence has a value.
    pub fn from_presence(seq: &MarkerSequence) -> Self {
        Self {
            n_frames: seq.n_frames(),
            n_markers: seq.n_markers(),
            bits: seq.presence().to_vec(),
        }
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_markers(&self) -> usize {
        self.n_markers
    }

    #[inline]
    pub fn is_observed(&self, t: usize, m: usize) -> bool {
        self.bits[t * self.n_markers + m]
    }

    #[inline]
    pub fn is_missing(&self, t: usize, m: usize) -> bool {
        !self.is_observed(t, m)
    }

    pub fn set(&mut self, t: usize, m: usize, observed: bool) {
        self.bits[t * self.n_markers + m] = observed;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn observed_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn missing_count(&self) -> usize {
        self.bits.len() - self.observed_count()
    }

    /// Per-coordinate `T × 3M` form; each marker bit is repeated for x, y, z.
    pub fn expand_coordinates(&self) -> Vec<bool> {
        self.bits.iter().flat_map(|&b| [b, b, b]).collect()
    }

    pub fn check_shape(&self, seq: &MarkerSequence) -> Result<()> {
        if self.n_frames != seq.n_frames() || self.n_markers != seq.n_markers() {
            return Err(Error::Shape(format!(
                "mask {}x{} vs sequence {}x{}",
                self.n_frames,
                self.n_markers,
                seq.n_frames(),
                seq.n_markers()
            )));
        }
        Ok(())
    }
}

/// The four body parts, in hips-outwards fill order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyPart {
    Hips,
    Torso,
    Head,
    Limbs,
}

impl BodyPart {
    pub const ALL: [BodyPart; 4] = [BodyPart::Hips, BodyPart::Torso, BodyPart::Head, BodyPart::Limbs];

    pub fn as_str(self) -> &'static str {
        match self {
            BodyPart::Hips => "hips",
            BodyPart::Torso => "torso",
            BodyPart::Head => "head",
            BodyPart::Limbs => "limbs",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BodyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BodyPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hips" => Ok(BodyPart::Hips),
            "torso" => Ok(BodyPart::Torso),
            "head" => Ok(BodyPart::Head),
            "limbs" => Ok(BodyPart::Limbs),
            other => Err(Error::InvalidArgument(format!("unknown body part {other:?}"))),
        }
    }
}

/// A heuristic bone: the distance between the centroids of two marker sets
/// placed on either side of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoneDef {
    pub name: String,
    pub end_a: Vec<String>,
    pub end_b: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerDef {
    pub id: String,
    pub actor: String,
}

/// Marker layout: actor assignment, hip anchors, body parts, bones and
/// left/right mirror pairs. Construct through [`SkeletonConfig::new`] or
/// `io::read_skeleton` so the invariants hold.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonConfig {
    pub actors: Vec<String>,
    pub markers: Vec<MarkerDef>,
    pub hip_markers: BTreeMap<String, Vec<String>>,
    /// Indexed by [`BodyPart::index`].
    pub body_parts: [Vec<String>; 4],
    pub bones: Vec<BoneDef>,
    pub mirror_pairs_x: Vec<(String, String)>,
    pub mirror_pairs_y: Vec<(String, String)>,
    /// Optional actor-local rest pose used by the synthetic generator.
    pub rest_pose: Option<BTreeMap<String, Vec3>>,
}

impl SkeletonConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        actors: Vec<String>,
        markers: Vec<MarkerDef>,
        hip_markers: BTreeMap<String, Vec<String>>,
        body_parts: [Vec<String>; 4],
        bones: Vec<BoneDef>,
        mirror_pairs_x: Vec<(String, String)>,
        mirror_pairs_y: Vec<(String, String)>,
        rest_pose: Option<BTreeMap<String, Vec3>>,
    ) -> Result<Self> {
        let skel = Self {
            actors,
            markers,
            hip_markers,
            body_parts,
            bones,
            mirror_pairs_x,
            mirror_pairs_y,
            rest_pose,
        };
        skel.validate()?;
        Ok(skel)
    }

    /// The bundled two-actor, 63-markers-per-actor layout with six bones per actor.
    pub fn default_two_actor() -> Self {
        crate::io::parse_skeleton_json(DEFAULT_SKELETON_JSON, "<bundled skeleton>")
            .expect("bundled skeleton is valid")
    }

    pub fn marker_ids(&self) -> impl Iterator<Item = &str> {
        self.markers.iter().map(|m| m.id.as_str())
    }

    pub fn actor_of(&self, marker: &str) -> Option<&str> {
        self.markers.iter().find(|m| m.id == marker).map(|m| m.actor.as_str())
    }

    pub fn part(&self, part: BodyPart) -> &[String] {
        &self.body_parts[part.index()]
    }

    /// Marker name with its actor prefix removed (`A1:LFHD` -> `LFHD`).
    pub fn local_name<'a>(&self, marker: &'a MarkerDef) -> &'a str {
        marker
            .id
            .strip_prefix(marker.actor.as_str())
            .and_then(|s| s.strip_prefix(':'))
            .unwrap_or(&marker.id)
    }

    /// Layout restricted to one actor's markers.
    pub fn restrict_to_actor(&self, actor: &str) -> Result<Self> {
        if !self.actors.iter().any(|a| a == actor) {
            return Err(Error::Skeleton(format!("unknown actor {actor:?}")));
        }
        let keep: HashSet<&str> = self
            .markers
            .iter()
            .filter(|m| m.actor == actor)
            .map(|m| m.id.as_str())
            .collect();
        let filt = |v: &Vec<String>| v.iter().filter(|id| keep.contains(id.as_str())).cloned().collect::<Vec<_>>();
        let pairs = |v: &Vec<(String, String)>| {
            v.iter()
                .filter(|(a, _)| keep.contains(a.as_str()))
                .cloned()
                .collect::<Vec<_>>()
        };
        Self::new(
            vec![actor.to_string()],
            self.markers.iter().filter(|m| m.actor == actor).cloned().collect(),
            self.hip_markers
                .iter()
                .filter(|(a, _)| a.as_str() == actor)
                .map(|(a, v)| (a.clone(), v.clone()))
                .collect(),
            [
                filt(&self.body_parts[0]),
                filt(&self.body_parts[1]),
                filt(&self.body_parts[2]),
                filt(&self.body_parts[3]),
            ],
            self.bones
                .iter()
                .filter(|b| keep.contains(b.end_a[0].as_str()))
                .cloned()
                .collect(),
            pairs(&self.mirror_pairs_x),
            pairs(&self.mirror_pairs_y),
            self.rest_pose.as_ref().map(|rp| {
                rp.iter()
                    .filter(|(id, _)| keep.contains(id.as_str()))
                    .map(|(id, p)| (id.clone(), *p))
                    .collect()
            }),
        )
    }

    /// This layout, or the single-actor restriction of it whose markers are
    /// exactly `marker_ids`.
    pub fn for_markers(&self, marker_ids: &[String]) -> Result<Self> {
        match self.index_for(marker_ids) {
            Ok(_) => Ok(self.clone()),
            Err(full) => {
                let actors: BTreeSet<&str> = marker_ids.iter().filter_map(|id| self.actor_of(id)).collect();
                if actors.len() != 1 || actors.len() == self.actors.len() {
                    return Err(full);
                }
                let one = self.restrict_to_actor(actors.into_iter().next().expect("one actor"))?;
                one.index_for(marker_ids)?;
                Ok(one)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Skeleton(msg));
        if self.actors.is_empty() {
            return err("no actors".into());
        }
        let actors: HashSet<&str> = self.actors.iter().map(String::as_str).collect();
        if actors.len() != self.actors.len() {
            return err("duplicate actor id".into());
        }
        if self.markers.is_empty() {
            return err("no markers".into());
        }
        let mut known: HashMap<&str, &str> = HashMap::new();
        for m in &self.markers {
            if !actors.contains(m.actor.as_str()) {
                return err(format!("marker {} assigned to unknown actor {}", m.id, m.actor));
            }
            if known.insert(m.id.as_str(), m.actor.as_str()).is_some() {
                return err(format!("duplicate marker id {}", m.id));
            }
        }
        let check = |id: &str, ctx: &str| -> Result<()> {
            if known.contains_key(id) {
                Ok(())
            } else {
                Err(Error::Skeleton(format!("{ctx} references unknown marker {id}")))
            }
        };

        for actor in &self.actors {
            let hips = self
                .hip_markers
                .get(actor)
                .ok_or_else(|| Error::Skeleton(format!("no hip markers for actor {actor}")))?;
            if hips.is_empty() {
                return err(format!("empty hip marker set for actor {actor}"));
            }
            for h in hips {
                check(h, "hip_markers")?;
                if known[h.as_str()] != actor {
                    return err(format!("hip marker {h} does not belong to actor {actor}"));
                }
            }
        }
        for actor in self.hip_markers.keys() {
            if !actors.contains(actor.as_str()) {
                return err(format!("hip_markers lists unknown actor {actor}"));
            }
        }

        let mut covered = HashSet::new();
        for (part, ids) in BodyPart::ALL.iter().zip(&self.body_parts) {
            for id in ids {
                check(id, &format!("body part {part}"))?;
                covered.insert(id.as_str());
            }
        }
        for m in &self.markers {
            if !covered.contains(m.id.as_str()) {
                return err(format!("marker {} belongs to no body part", m.id));
            }
        }

        for bone in &self.bones {
            if bone.end_a.is_empty() || bone.end_b.is_empty() {
                return err(format!("bone {} has an empty endpoint", bone.name));
            }
            for id in bone.end_a.iter().chain(&bone.end_b) {
                check(id, &format!("bone {}", bone.name))?;
            }
            let a: HashSet<_> = bone.end_a.iter().collect();
            if bone.end_b.iter().any(|id| a.contains(id)) {
                return err(format!("bone {} endpoints overlap", bone.name));
            }
        }

        for (label, pairs) in [("mirror_pairs_x", &self.mirror_pairs_x), ("mirror_pairs_y", &self.mirror_pairs_y)] {
            let mut partner: HashMap<&str, &str> = HashMap::new();
            for (a, b) in pairs {
                check(a, label)?;
                check(b, label)?;
                if a == b {
                    return err(format!("{label}: marker {a} paired with itself"));
                }
                if known[a.as_str()] != known[b.as_str()] {
                    return err(format!("{label}: pair ({a}, {b}) spans two actors"));
                }
                for (x, y) in [(a.as_str(), b.as_str()), (b.as_str(), a.as_str())] {
                    if let Some(prev) = partner.insert(x, y) {
                        if prev != y {
                            return err(format!(
                                "{label}: asymmetric mirror pair, {x} paired with both {prev} and {y}"
                            ));
                        }
                    }
                }
            }
        }

        if let Some(rest) = &self.rest_pose {
            for id in rest.keys() {
                check(id, "rest_pose")?;
            }
            if let Some(m) = self.markers.iter().find(|m| !rest.contains_key(&m.id)) {
                return err(format!("rest_pose has no position for marker {}", m.id));
            }
        }
        Ok(())
    }

    /// Resolve marker ids to column indices of a sequence with the given ids.
    /// The two marker sets must be identical.
    pub fn index_for(&self, marker_ids: &[String]) -> Result<SkeletonIndex> {
        let pos: HashMap<&str, usize> = marker_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let lookup = |id: &str| -> Result<usize> {
            pos.get(id)
                .copied()
                .ok_or_else(|| Error::Skeleton(format!("skeleton marker {id} not in sequence")))
        };
        let skel_ids: HashSet<&str> = self.marker_ids().collect();
        if let Some(extra) = marker_ids.iter().find(|id| !skel_ids.contains(id.as_str())) {
            return Err(Error::Skeleton(format!("sequence marker {extra} not in skeleton")));
        }
        let actor_idx: HashMap<&str, usize> = self.actors.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let mut actor_of = vec![0; marker_ids.len()];
        for m in &self.markers {
            actor_of[lookup(&m.id)?] = actor_idx[m.actor.as_str()];
        }
        let hips = self
            .actors
            .iter()
            .map(|a| self.hip_markers[a].iter().map(|id| lookup(id)).collect())
            .collect::<Result<Vec<Vec<usize>>>>()?;
        let parts = [0, 1, 2, 3].map(|i| self.body_parts[i].iter().map(|id| lookup(id)).collect::<Result<Vec<_>>>());
        let [p0, p1, p2, p3] = parts;
        let bones = self
            .bones
            .iter()
            .map(|b| {
                Ok(BoneIndex {
                    name: b.name.clone(),
                    end_a: b.end_a.iter().map(|id| lookup(id)).collect::<Result<_>>()?,
                    end_b: b.end_b.iter().map(|id| lookup(id)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let pairs = |v: &[(String, String)]| -> Result<Vec<(usize, usize)>> {
            v.iter().map(|(a, b)| Ok((lookup(a)?, lookup(b)?))).collect()
        };
        Ok(SkeletonIndex {
            n_actors: self.actors.len(),
            actor_of,
            hips,
            parts: [p0?, p1?, p2?, p3?],
            bones,
            mirror_x: pairs(&self.mirror_pairs_x)?,
            mirror_y: pairs(&self.mirror_pairs_y)?,
        })
    }
}

pub const DEFAULT_SKELETON_JSON: &str = include_str!("../data/skeleton_default.json");

#[derive(Clone, Debug, PartialEq)]
pub struct BoneIndex {
    pub name: String,
    pub end_a: Vec<usize>,
    pub end_b: Vec<usize>,
}

/// A [`SkeletonConfig`] resolved against one sequence's marker columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonIndex {
    pub n_actors: usize,
    /// Actor index of every sequence column.
    pub actor_of: Vec<usize>,
    pub hips: Vec<Vec<usize>>,
    pub parts: [Vec<usize>; 4],
    pub bones: Vec<BoneIndex>,
    pub mirror_x: Vec<(usize, usize)>,
    pub mirror_y: Vec<(usize, usize)>,
}

/// Gap curriculum and loss parameters for training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumParams {
    pub n_start: f64,
    pub n_rate: f64,
    pub d_start: f64,
    pub d_rate: f64,
    /// Upper bound of the noise schedule, cm.
    pub noise_cap: f64,
    /// Weight of the velocity term in the training loss.
    pub velocity_weight: f64,
}

impl CurriculumParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.n_start, self.n_rate, self.d_start, self.d_rate, self.noise_cap, self.velocity_weight];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!("curriculum parameters must be non-negative: {self:?}")));
        }
        if self.noise_cap <= 0.0 {
            return Err(Error::InvalidArgument("noise cap must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rating {
    pub stimulus_id: String,
    pub rater_id: String,
    pub rating: i64,
}

/// Ordinal ratings of stimuli. Raters may rate any subset of stimuli.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingsTable {
    categories: Vec<i64>,
    rows: Vec<Rating>,
}

impl RatingsTable {
    pub const DEFAULT_CATEGORIES: [i64; 5] = [1, 2, 3, 4, 5];

    pub fn new(rows: Vec<Rating>) -> Result<Self> {
        Self::with_categories(rows, Self::DEFAULT_CATEGORIES.to_vec())
    }

    pub fn with_categories(rows: Vec<Rating>, mut categories: Vec<i64>) -> Result<Self> {
        categories.sort_unstable();
        categories.dedup();
        if categories.is_empty() {
            return Err(Error::InvalidArgument("empty category set".into()));
        }
        let mut seen = HashSet::new();
        for r in &rows {
            if categories.binary_search(&r.rating).is_err() {
                return Err(Error::InvalidArgument(format!(
                    "rating {} of stimulus {} by {} outside categories {categories:?}",
                    r.rating, r.stimulus_id, r.rater_id
                )));
            }
            if !seen.insert((r.stimulus_id.as_str(), r.rater_id.as_str())) {
                return Err(Error::InvalidArgument(format!(
                    "rater {} rated stimulus {} twice",
                    r.rater_id, r.stimulus_id
                )));
            }
        }
        Ok(Self { categories, rows })
    }

    pub fn categories(&self) -> &[i64] {
        &self.categories
    }

    pub fn rows(&self) -> &[Rating] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn stimuli(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.stimulus_id.as_str()).collect()
    }

    /// Ratings grouped by stimulus, in stimulus-id order.
    pub fn by_stimulus(&self) -> BTreeMap<&str, Vec<i64>> {
        let mut out: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
        for r in &self.rows {
            out.entry(r.stimulus_id.as_str()).or_default().push(r.rating);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricName {
    Rmse,
    VdGt,
    Vd,
    BdpGt,
    Bdp,
}

impl MetricName {
    pub const ALL: [MetricName; 5] = [
        MetricName::Rmse,
        MetricName::VdGt,
        MetricName::Vd,
        MetricName::BdpGt,
        MetricName::Bdp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Rmse => "rmse",
            MetricName::VdGt => "vd_gt",
            MetricName::Vd => "vd",
            MetricName::BdpGt => "bdp_gt",
            MetricName::Bdp => "bdp",
        }
    }

    pub fn needs_ground_truth(self) -> bool {
        matches!(self, MetricName::Rmse | MetricName::VdGt | MetricName::BdpGt)
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub stimulus_id: String,
    pub metric: MetricName,
    pub value: f64,
    pub norm: NormMode,
}

/// Per-stimulus metric values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn new(rows: Vec<MetricRow>) -> Result<Self> {
        let mut report = Self::default();
        for row in rows {
            report.push(row)?;
        }
        Ok(report)
    }

    pub fn push(&mut self, row: MetricRow) -> Result<()> {
        if !(row.value.is_finite() && row.value >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "metric {} of {} must be finite and non-negative, got {}",
                row.metric, row.stimulus_id, row.value
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn metrics(&self) -> BTreeSet<MetricName> {
        self.rows.iter().map(|r| r.metric).collect()
    }

    pub fn stimuli(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.stimulus_id.as_str()).collect()
    }

    /// Values of one metric keyed by stimulus.
    pub fn values_of(&self, metric: MetricName) -> BTreeMap<&str, f64> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| (r.stimulus_id.as_str(), r.value))
            .collect()
    }
}
