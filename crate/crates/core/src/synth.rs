//! Synthetic clean motion: a rest pose per actor animated by sums of
//! sinusoids (global path, heading, per-part rotations, soft-tissue wobble)
//! plus white measurement jitter.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{BodyPart, MarkerSequence, PointGrid, SkeletonConfig, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub actors: usize,
    pub seconds: f64,
    pub fps: f64,
    /// Path half-length is three times this; rotation angles and wobble
    /// scale with it. Zero gives a static pose.
    pub amplitude: f64,
    /// Frequency band of the sinusoids, Hz.
    pub band: (f64, f64),
    /// Standard deviation of per-coordinate measurement jitter, as a
    /// fraction of `amplitude`.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            actors: 2,
            seconds: 20.0,
            fps: 120.0,
            amplitude: 20.0,
            band: (0.2, 1.2),
            jitter: 0.0106,
            seed: 0,
        }
    }
}

/// Reference amplitude at which the angle scales below apply unchanged.
const REFERENCE_AMPLITUDE: f64 = 20.0;

impl SynthSpec {
    pub fn n_frames(&self) -> usize {
        (self.seconds * self.fps).round() as usize
    }

    /// Per-axis amplitude of the soft-tissue wobble, cm.
    pub fn tissue(&self) -> f64 {
        0.005 * self.amplitude
    }

    /// Jitter standard deviation, cm.
    pub fn jitter_sd(&self) -> f64 {
        self.jitter * self.amplitude
    }

    /// Largest deviation of any bone length from its rest value without
    /// jitter: each endpoint centroid moves at most `√3·tissue`.
    pub fn bone_length_bound(&self) -> f64 {
        2.0 * 3f64.sqrt() * self.tissue()
    }

    fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidArgument(format!("fps must be > 0, got {}", self.fps)));
        }
        if !self.seconds.is_finite() || self.n_frames() < 3 {
            return Err(Error::InvalidArgument(format!(
                "{} s at {} fps is fewer than 3 frames",
                self.seconds, self.fps
            )));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {}", self.amplitude)));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(Error::InvalidArgument(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        let (lo, hi) = self.band;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
            return Err(Error::InvalidArgument(format!("invalid frequency band {lo}..{hi}")));
        }
        if self.actors == 0 {
            return Err(Error::InvalidArgument("at least one actor".into()));
        }
        Ok(())
    }
}

/// Sum of sinusoids `Σ a_i sin(ω_i t + φ_i)`.
#[derive(Clone, Debug)]
struct Wave(Vec<(f64, f64, f64)>);

impl Wave {
    fn random(rng: &mut ChaCha8Rng, scale: f64, band: (f64, f64), terms: usize) -> Self {
        let weights: Vec<f64> = (0..terms).map(|_| rng.random_range(0.5..1.0)).collect();
        let total: f64 = weights.iter().sum();
        Wave(
            weights
                .into_iter()
                .map(|w| {
                    let f = if band.1 > band.0 { rng.random_range(band.0..band.1) } else { band.0 };
                    (scale * w / total, TAU * f, rng.random_range(0.0..TAU))
                })
                .collect(),
        )
    }

    fn at(&self, t: f64) -> f64 {
        self.0.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Group {
    Root,
    Torso,
    Head,
    Arm(usize),
    Leg(usize),
}

/// Three Euler-angle waves.
struct Joint {
    pivot: Vector3<f64>,
    angles: [Wave; 3],
}

impl Joint {
    fn rotation(&self, t: f64) -> Rotation3<f64> {
        Rotation3::from_euler_angles(self.angles[0].at(t), self.angles[1].at(t), self.angles[2].at(t))
    }

    fn apply(&self, r: &Rotation3<f64>, p: Vector3<f64>) -> Vector3<f64> {
        r * (p - self.pivot) + self.pivot
    }
}

struct ActorMotion {
    heading: f64,
    path_axis: usize,
    path_phase: f64,
    wander: [Wave; 3],
    yaw: Wave,
    torso: Joint,
    head: Joint,
    arms: [Joint; 2],
    legs: [Joint; 2],
}

fn centroid(points: &[Vec3]) -> Vector3<f64> {
    let mut c = Vector3::zeros();
    for p in points {
        c += Vector3::from(*p);
    }
    c / points.len().max(1) as f64
}

/// Generate a clean, fully present sequence over the skeleton's markers.
///
/// The skeleton must carry a rest pose and have exactly `spec.actors`
/// actors. Limb markers farther from the mid-plane than every hip marker
/// form the arms; the remaining limb markers form the legs.
pub fn generate(spec: &SynthSpec, skel: &SkeletonConfig) -> Result<MarkerSequence> {
    spec.validate()?;
    if skel.actors.len() != spec.actors {
        return Err(Error::Skeleton(format!(
            "skeleton has {} actors, {} requested",
            skel.actors.len(),
            spec.actors
        )));
    }
    let rest = skel
        .rest_pose
        .as_ref()
        .ok_or_else(|| Error::Skeleton("synthesis needs a rest pose".into()))?;
    let part_of = |id: &str| BodyPart::ALL.into_iter().find(|p| skel.part(*p).iter().any(|m| m == id));

    let s = spec.amplitude / REFERENCE_AMPLITUDE;
    let band = spec.band;
    let mut actors = Vec::with_capacity(spec.actors);
    let mut group_of = vec![Group::Root; skel.markers.len()];
    for (a, actor) in skel.actors.iter().enumerate() {
        let ids: Vec<&str> = skel.markers.iter().filter(|m| &m.actor == actor).map(|m| m.id.as_str()).collect();
        let pos = |id: &str| rest[id];
        let hips: Vec<Vec3> = skel.hip_markers[actor].iter().map(|id| pos(id)).collect();
        let waist = centroid(&hips);
        let hip_width = ids
            .iter()
            .filter(|id| part_of(id) == Some(BodyPart::Hips))
            .map(|id| (pos(id)[0] - waist.x).abs())
            .fold(0.0, f64::max);
        let classify = |id: &str| -> Group {
            match part_of(id) {
                Some(BodyPart::Hips) | None => Group::Root,
                Some(BodyPart::Torso) => Group::Torso,
                Some(BodyPart::Head) => Group::Head,
                Some(BodyPart::Limbs) => {
                    let p = pos(id);
                    let side = usize::from(p[0] > waist.x);
                    if (p[0] - waist.x).abs() > hip_width {
                        Group::Arm(side)
                    } else {
                        Group::Leg(side)
                    }
                }
            }
        };
        let members = |g: Group| -> Vec<Vec3> { ids.iter().filter(|id| classify(id) == g).map(|id| pos(id)).collect() };
        let top = |g: Group| -> Vector3<f64> {
            members(g)
                .into_iter()
                .max_by(|p, q| p[2].total_cmp(&q[2]))
                .map(Vector3::from)
                .unwrap_or(waist)
        };
        let torso_top = members(Group::Torso).iter().map(|p| p[2]).fold(waist.z, f64::max);
        let head_c = centroid(&members(Group::Head));
        let neck = Vector3::new(head_c.x, head_c.y, torso_top);

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(a as u64);
        let mut joint = |pivot: Vector3<f64>, scales: [f64; 3]| Joint {
            pivot,
            angles: scales.map(|sc| Wave::random(&mut rng, sc * s, band, 3)),
        };
        let torso = joint(waist, [0.12, 0.08, 0.10]);
        let head = joint(neck, [0.15, 0.10, 0.25]);
        let arms = [
            joint(top(Group::Arm(0)), [0.5, 0.2, 0.1]),
            joint(top(Group::Arm(1)), [0.5, 0.2, 0.1]),
        ];
        let legs = [
            joint(top(Group::Leg(0)), [0.35, 0.08, 0.05]),
            joint(top(Group::Leg(1)), [0.35, 0.08, 0.05]),
        ];
        let mut wave3 = |sc: [f64; 3]| sc.map(|x| Wave::random(&mut rng, x * spec.amplitude, band, 3));
        let wander = wave3([0.25, 0.25, 0.05]);
        let yaw = Wave::random(&mut rng, 0.3 * s, band, 3);
        actors.push(ActorMotion {
            heading: if a % 2 == 0 { 0.0 } else { PI },
            path_axis: a % 2,
            path_phase: a as f64 * FRAC_PI_2,
            wander,
            yaw,
            torso,
            head,
            arms,
            legs,
        });
        for (i, m) in skel.markers.iter().enumerate() {
            if &m.actor == actor {
                group_of[i] = classify(&m.id);
            }
        }
    }
    let actor_idx: Vec<usize> = skel
        .markers
        .iter()
        .map(|m| skel.actors.iter().position(|a| *a == m.actor).expect("validated actor"))
        .collect();

    // Soft tissue: one sinusoid per marker and axis, from a stream of its own.
    let tissue = spec.tissue();
    let mut trng = ChaCha8Rng::seed_from_u64(spec.seed);
    trng.set_stream(1 << 32);
    let wobble: Vec<[Wave; 3]> = (0..skel.markers.len())
        .map(|_| [0; 3].map(|_| Wave::random(&mut trng, tissue, band, 1)))
        .collect();

    let path_radius = 3.0 * spec.amplitude;
    let path_omega = TAU * band.0 * 0.5;
    let n = spec.n_frames();
    let mut grid = PointGrid::zeros(n, skel.markers.len());
    for f in 0..n {
        let t = f as f64 / spec.fps;
        let frames: Vec<_> = actors
            .iter()
            .map(|am| {
                let mut root = Vector3::new(am.wander[0].at(t), am.wander[1].at(t), am.wander[2].at(t));
                root[am.path_axis] += path_radius * (path_omega * t + am.path_phase).sin();
                let heading = Rotation3::from_axis_angle(&Vector3::z_axis(), am.heading + am.yaw.at(t));
                let torso = am.torso.rotation(t);
                (root, heading, torso, am.head.rotation(t), am.arms.each_ref().map(|j| j.rotation(t)), am.legs.each_ref().map(|j| j.rotation(t)))
            })
            .collect();
        for (m, def) in skel.markers.iter().enumerate() {
            let am = &actors[actor_idx[m]];
            let (root, heading, torso, head, arms, legs) = &frames[actor_idx[m]];
            let mut p = Vector3::from(rest[&def.id]);
            for c in 0..3 {
                p[c] += wobble[m][c].at(t);
            }
            let local = match group_of[m] {
                Group::Root => p,
                Group::Torso => am.torso.apply(torso, p),
                Group::Head => am.torso.apply(torso, am.head.apply(head, p)),
                Group::Arm(i) => am.torso.apply(torso, am.arms[i].apply(&arms[i], p)),
                Group::Leg(i) => am.legs[i].apply(&legs[i], p),
            };
            let w = heading * local + root;
            grid.set(f, m, [w.x, w.y, w.z]);
        }
    }

    let sd = spec.jitter_sd();
    if sd > 0.0 {
        let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut jrng = ChaCha8Rng::seed_from_u64(spec.seed);
        jrng.set_stream(2 << 32);
        for f in 0..n {
            for m in 0..skel.markers.len() {
                for v in grid.get_mut(f, m).iter_mut() {
                    *v += normal.sample(&mut jrng);
                }
            }
        }
    }
    MarkerSequence::from_full(grid, skel.markers.iter().map(|m| m.id.clone()).collect(), spec.fps)
}
