//! Seeded corruption of clean sequences: gap masks, the training curriculum,
//! masked and global Gaussian noise, occlusion and gap interpolation.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::model::{BodyPart, CurriculumParams, MarkerSequence, ObservationMask, PointGrid, SkeletonConfig};

/// How missing entries are distributed.
#[derive(Clone, Debug, PartialEq)]
pub enum GapMode {
    /// Every interior entry missing independently with probability `p`.
    Iid { p: f64 },
    /// `markers` distinct markers, each with one gap of `duration` frames.
    Window { markers: usize, duration: usize },
    /// All markers of one body part share one gap of `duration` frames.
    BodyPart { part: BodyPart, duration: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapSpec {
    pub mode: GapMode,
    pub seed: u64,
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sample an observation mask. Frames 0 and `T-1` are always observed.
/// Columns are taken to follow the skeleton's marker order; use
/// [`sample_mask_for`] when they may not.
pub fn sample_mask(n_frames: usize, n_markers: usize, spec: &GapSpec, skel: &SkeletonConfig) -> Result<ObservationMask> {
    sample_mask_with(n_frames, n_markers, spec, |part| {
        Ok(skel.index_for_count(n_markers)?.parts[part.index()].clone())
    })
}

/// [`sample_mask`] for a concrete sequence, resolving body parts by marker id.
pub fn sample_mask_for(seq: &MarkerSequence, spec: &GapSpec, skel: &SkeletonConfig) -> Result<ObservationMask> {
    sample_mask_with(seq.n_frames(), seq.n_markers(), spec, |part| {
        Ok(skel.index_for(seq.marker_ids())?.parts[part.index()].clone())
    })
}

fn sample_mask_with(
    n_frames: usize,
    n_markers: usize,
    spec: &GapSpec,
    part_columns: impl FnOnce(BodyPart) -> Result<Vec<usize>>,
) -> Result<ObservationMask> {
    if n_frames < 2 || n_markers == 0 {
        return Err(Error::Shape(format!("cannot mask a {n_frames}x{n_markers} sequence")));
    }
    let mut mask = ObservationMask::all_observed(n_frames, n_markers);
    let mut rng = rng(spec.seed);
    let fits = |d: usize| -> Result<()> {
        if d > n_frames - 2 {
            return Err(Error::InvalidArgument(format!(
                "gap of {d} frames does not fit between the first and last of {n_frames} frames"
            )));
        }
        Ok(())
    };
    match spec.mode {
        GapMode::Iid { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("missing probability {p} outside [0, 1]")));
            }
            for t in 1..n_frames - 1 {
                for m in 0..n_markers {
                    if rng.random_bool(p) {
                        mask.set(t, m, false);
                    }
                }
            }
        }
        GapMode::Window { markers, duration } => {
            fits(duration)?;
            if markers > n_markers {
                return Err(Error::InvalidArgument(format!(
                    "{markers} gapped markers requested but only {n_markers} exist"
                )));
            }
            if duration > 0 {
                for m in sample(&mut rng, n_markers, markers).into_iter() {
                    let onset = rng.random_range(1..=n_frames - 1 - duration);
                    for t in onset..onset + duration {
                        mask.set(t, m, false);
                    }
                }
            }
        }
        GapMode::BodyPart { part, duration } => {
            fits(duration)?;
            let cols = part_columns(part)?;
            if cols.is_empty() {
                return Err(Error::InvalidArgument(format!("body part {part} has no markers")));
            }
            if duration > 0 {
                let onset = rng.random_range(1..=n_frames - 1 - duration);
                for &m in &cols {
                    for t in onset..onset + duration {
                        mask.set(t, m, false);
                    }
                }
            }
        }
    }
    Ok(mask)
}

impl SkeletonConfig {
    /// Resolve against a sequence whose columns follow the skeleton's marker order.
    pub(crate) fn index_for_count(&self, n_markers: usize) -> Result<crate::model::SkeletonIndex> {
        if n_markers != self.markers.len() {
            return Err(Error::Shape(format!(
                "skeleton has {} markers, sequence has {n_markers}",
                self.markers.len()
            )));
        }
        let ids: Vec<String> = self.markers.iter().map(|m| m.id.clone()).collect();
        self.index_for(&ids)
    }
}

/// Missing-marker count and gap duration for an epoch, rounded half away from
/// zero and capped at `M` and `T-2`.
pub fn curriculum(epoch: usize, params: &CurriculumParams, n_frames: usize, n_markers: usize) -> (usize, usize) {
    let ep = epoch as f64;
    let number = (ep * params.n_rate + params.n_start).round().max(0.0) as usize;
    let duration = (ep * params.d_rate + params.d_start).round().max(0.0) as usize;
    (number.min(n_markers), duration.min(n_frames.saturating_sub(2)))
}

/// `(tanh((ep - 10) / 20) + 1) * c / 2`
pub fn noise_sigma(epoch: f64, cap: f64) -> f64 {
    ((epoch - 10.0) / 20.0).tanh().mul_add(cap / 2.0, cap / 2.0)
}

/// Add zero-mean Gaussian noise of `sigma` cm to every coordinate of every
/// masked-missing entry; observed entries pass through bit-exactly.
pub fn add_masked_noise(seq: &MarkerSequence, mask: &ObservationMask, sigma: f64, seed: u64) -> Result<MarkerSequence> {
    mask.check_shape(seq)?;
    perturb(seq, sigma, seed, |t, m| mask.is_missing(t, m))
}

/// Add zero-mean Gaussian noise of `sigma` cm to every coordinate.
pub fn add_global_noise(seq: &MarkerSequence, sigma: f64, seed: u64) -> Result<MarkerSequence> {
    perturb(seq, sigma, seed, |_, _| true)
}

fn perturb(seq: &MarkerSequence, sigma: f64, seed: u64, select: impl Fn(usize, usize) -> bool) -> Result<MarkerSequence> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let grid = seq.full_positions()?;
    if sigma == 0.0 {
        return Ok(seq.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = rng(seed);
    let mut out = grid.clone();
    for t in 0..grid.n_frames() {
        for m in 0..grid.n_markers() {
            if select(t, m) {
                let p = out.get_mut(t, m);
                for v in p.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
        }
    }
    seq.with_positions(out)
}

/// Occlude: presence becomes `mask ∧ present`.
pub fn apply_mask(seq: &MarkerSequence, mask: &ObservationMask) -> Result<MarkerSequence> {
    mask.check_shape(seq)?;
    let present = seq.presence().iter().zip(mask.bits()).map(|(&p, &o)| p && o).collect();
    seq.with_presence(present)
}

/// Fill every gap with a per-coordinate cubic Hermite segment between the
/// last observation before and the first after it. Endpoint slopes are
/// one-sided first differences from the neighbouring observed frames, or zero
/// when that neighbour is absent.
pub fn interpolate_gaps(seq: &MarkerSequence) -> Result<MarkerSequence> {
    let (t_len, m_len) = (seq.n_frames(), seq.n_markers());
    for m in 0..m_len {
        for t in [0, t_len - 1] {
            if !seq.is_present(t, m) {
                return Err(Error::Missing(format!(
                    "marker {} absent at frame {t}; gaps touching the first or last frame cannot be interpolated",
                    seq.marker_ids()[m]
                )));
            }
        }
    }
    let mut grid: PointGrid = seq.raw_positions().clone();
    for m in 0..m_len {
        let mut t = 1;
        while t < t_len {
            if seq.is_present(t, m) {
                t += 1;
                continue;
            }
            let a = t - 1;
            let mut b = t;
            while !seq.is_present(b, m) {
                b += 1;
            }
            let ya = grid.get(a, m);
            let yb = grid.get(b, m);
            let slope_a = match a.checked_sub(1) {
                Some(p) if seq.is_present(p, m) => Some(grid.get(p, m)),
                _ => None,
            };
            let slope_b = if b + 1 < t_len && seq.is_present(b + 1, m) {
                Some(grid.get(b + 1, m))
            } else {
                None
            };
            let h = (b - a) as f64;
            for k in a + 1..b {
                let s = (k - a) as f64 / h;
                let s2 = s * s;
                let s3 = s2 * s;
                let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
                let h10 = s3 - 2.0 * s2 + s;
                let h01 = -2.0 * s3 + 3.0 * s2;
                let h11 = s3 - s2;
                let mut p = [0.0; 3];
                for c in 0..3 {
                    let m0 = slope_a.map_or(0.0, |q| ya[c] - q[c]);
                    let m1 = slope_b.map_or(0.0, |q| q[c] - yb[c]);
                    p[c] = h00 * ya[c] + h10 * h * m0 + h01 * yb[c] + h11 * h * m1;
                }
                grid.set(k, m, p);
            }
            t = b + 1;
        }
    }
    let n = t_len * m_len;
    MarkerSequence::new(grid, vec![true; n], seq.marker_ids().to_vec(), seq.fps())
}
