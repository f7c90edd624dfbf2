//! Gap filling: the reconstructor contract, the interpolation baseline, the
//! windowed ridge denoiser, hips-outwards iteration and post-processing.

mod ridge;
mod savgol;

pub use ridge::{fill_ridge, train_ridge, FeatureLayout, NormalEquations, RidgeConfig, RidgeDenoiser, TrainingSample, MODEL_HEADER};
pub use savgol::{postprocess, savgol_coefficients, savgol_smooth, EdgeMode, SmoothScope, SmoothingParams};

use crate::corrupt::{apply_mask, interpolate_gaps};
use crate::error::{Error, Result};
use crate::model::{BodyPart, MarkerSequence, ObservationMask, SkeletonConfig};

/// A gap-filling method.
///
/// `input` is fully present: gaps have already been interpolated (and, inside
/// hips-outwards, earlier parts already predicted). Implementations return a
/// sequence of the same shape and must be deterministic.
pub trait Reconstructor {
    fn fill(&self, input: &MarkerSequence, mask: &ObservationMask, skel: &SkeletonConfig) -> Result<MarkerSequence>;
}

impl<R: Reconstructor + ?Sized> Reconstructor for &R {
    fn fill(&self, input: &MarkerSequence, mask: &ObservationMask, skel: &SkeletonConfig) -> Result<MarkerSequence> {
        (**self).fill(input, mask, skel)
    }
}

impl<R: Reconstructor + ?Sized> Reconstructor for Box<R> {
    fn fill(&self, input: &MarkerSequence, mask: &ObservationMask, skel: &SkeletonConfig) -> Result<MarkerSequence> {
        (**self).fill(input, mask, skel)
    }
}

/// The no-learning baseline: cubic Hermite interpolation across each gap.
#[derive(Clone, Copy, Debug, Default)]
pub struct InterpolationFill;

impl Reconstructor for InterpolationFill {
    fn fill(&self, input: &MarkerSequence, mask: &ObservationMask, _skel: &SkeletonConfig) -> Result<MarkerSequence> {
        fill_interpolation(input, mask)
    }
}

/// Drop the masked-missing entries and interpolate across them.
pub fn fill_interpolation(corrupted: &MarkerSequence, mask: &ObservationMask) -> Result<MarkerSequence> {
    interpolate_gaps(&apply_mask(corrupted, mask)?)
}

/// One reconstructor per body part, applied hips first.
pub struct PartModels<'a> {
    models: [&'a dyn Reconstructor; 4],
}

impl<'a> PartModels<'a> {
    pub fn new(
        hips: &'a dyn Reconstructor,
        torso: &'a dyn Reconstructor,
        head: &'a dyn Reconstructor,
        limbs: &'a dyn Reconstructor,
    ) -> Self {
        Self {
            models: [hips, torso, head, limbs],
        }
    }

    /// The same model for every part.
    pub fn shared(model: &'a dyn Reconstructor) -> Self {
        Self { models: [model; 4] }
    }

    pub fn get(&self, part: BodyPart) -> &'a dyn Reconstructor {
        self.models[part.index()]
    }
}

/// Fill body parts one at a time in the order hips, torso, head, limbs.
///
/// The working sequence starts as the interpolated input. Each step runs the
/// part's model on the current working sequence and overwrites only that
/// part's missing entries, so later parts see earlier predictions.
pub fn fill_hips_outwards(
    models: &PartModels<'_>,
    corrupted: &MarkerSequence,
    mask: &ObservationMask,
    skel: &SkeletonConfig,
) -> Result<MarkerSequence> {
    mask.check_shape(corrupted)?;
    let idx = skel.index_for(corrupted.marker_ids())?;
    let mut working = fill_interpolation(corrupted, mask)?;
    for part in BodyPart::ALL {
        let cols = &idx.parts[part.index()];
        if cols.is_empty() {
            return Err(Error::Skeleton(format!("body part {part} has no markers")));
        }
        let entries: Vec<(usize, usize)> = (0..mask.n_frames())
            .flat_map(|t| cols.iter().map(move |&m| (t, m)))
            .filter(|&(t, m)| mask.is_missing(t, m))
            .collect();
        if entries.is_empty() {
            continue;
        }
        let pred = models
            .get(part)
            .fill(&working, mask, skel)
            .map_err(|e| e.context(format!("{part} model")))?;
        pred.same_shape(&working)
            .map_err(|e| e.context(format!("{part} model output")))?;
        let pred_grid = pred
            .full_positions()
            .map_err(|e| e.context(format!("{part} model output")))?;
        let mut grid = working.full_positions()?.clone();
        for (t, m) in entries {
            grid.set(t, m, pred_grid.get(t, m));
        }
        working = working.with_positions(grid)?;
    }
    Ok(working)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MarkerDef, PointGrid, Vec3};
    use std::cell::RefCell;
    use std::collections::BTreeMap;

    fn skel() -> SkeletonConfig {
        let ids: Vec<String> = (0..4).map(|i| format!("A1:M{i}")).collect();
        let mut hips = BTreeMap::new();
        hips.insert("A1".to_string(), vec![ids[0].clone()]);
        SkeletonConfig::new(
            vec!["A1".into()],
            ids.iter().map(|id| MarkerDef { id: id.clone(), actor: "A1".into() }).collect(),
            hips,
            [vec![ids[0].clone()], vec![ids[1].clone()], vec![ids[2].clone()], vec![ids[3].clone()]],
            vec![],
            vec![],
            vec![],
            None,
        )
        .unwrap()
    }

    fn seq(f: impl FnMut(usize, usize) -> Vec3) -> MarkerSequence {
        MarkerSequence::from_full(PointGrid::from_fn(8, 4, f), (0..4).map(|i| format!("A1:M{i}")).collect(), 120.0)
            .unwrap()
    }

    struct Constant(f64);

    impl Reconstructor for Constant {
        fn fill(&self, input: &MarkerSequence, _: &ObservationMask, _: &SkeletonConfig) -> Result<MarkerSequence> {
            input.with_positions(PointGrid::from_fn(input.n_frames(), input.n_markers(), |_, _| [self.0; 3]))
        }
    }

    struct Recorder<'a> {
        name: &'static str,
        log: &'a RefCell<Vec<&'static str>>,
    }

    impl Reconstructor for Recorder<'_> {
        fn fill(&self, input: &MarkerSequence, _: &ObservationMask, _: &SkeletonConfig) -> Result<MarkerSequence> {
            self.log.borrow_mut().push(self.name);
            Ok(input.clone())
        }
    }

    #[test]
    fn gapless_input_is_untouched_and_models_unused() {
        let s = seq(|t, m| [t as f64, m as f64, 0.5]);
        let log = RefCell::new(vec![]);
        let r = Recorder { name: "x", log: &log };
        let mask = ObservationMask::all_observed(8, 4);
        let out = fill_hips_outwards(&PartModels::shared(&r), &s, &mask, &skel()).unwrap();
        assert_eq!(out, s);
        assert!(log.borrow().is_empty());
        assert_eq!(fill_interpolation(&s, &mask).unwrap(), s);
    }

    #[test]
    fn only_part_entries_are_overwritten() {
        let s = seq(|t, m| [t as f64, m as f64, 0.5]);
        let mut mask = ObservationMask::all_observed(8, 4);
        mask.set(3, 1, false);
        mask.set(4, 2, false);
        let (a, b, c, d) = (Constant(1.0), Constant(2.0), Constant(3.0), Constant(4.0));
        let out = fill_hips_outwards(&PartModels::new(&a, &b, &c, &d), &s, &mask, &skel()).unwrap();
        assert_eq!(out.get(3, 1), Some([2.0; 3]));
        assert_eq!(out.get(4, 2), Some([3.0; 3]));
        for t in 0..8 {
            for m in 0..4 {
                if mask.is_observed(t, m) {
                    assert_eq!(out.get(t, m), s.get(t, m));
                }
            }
        }
    }

    struct Failing;

    impl Reconstructor for Failing {
        fn fill(&self, _: &MarkerSequence, _: &ObservationMask, _: &SkeletonConfig) -> Result<MarkerSequence> {
            Err(Error::Numeric("boom".into()))
        }
    }

    #[test]
    fn model_failure_names_the_part() {
        let s = seq(|t, _| [t as f64; 3]);
        let mut mask = ObservationMask::all_observed(8, 4);
        mask.set(2, 2, false);
        let ok = InterpolationFill;
        let err = fill_hips_outwards(&PartModels::new(&ok, &ok, &Failing, &ok), &s, &mask, &skel()).unwrap_err();
        assert!(err.to_string().starts_with("head model"), "{err}");
    }
}
