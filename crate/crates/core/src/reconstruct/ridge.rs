use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fill_interpolation, Reconstructor};
use crate::corrupt::{add_masked_noise, curriculum, interpolate_gaps, apply_mask, noise_sigma, sample_mask_for, GapMode, GapSpec};
use crate::error::{Error, Result};
use crate::io::{atomic_write, center_hips, CenteredSequence};
use crate::model::{sub, BodyPart, CurriculumParams, MarkerSequence, ObservationMask, SkeletonConfig};

/// First line of every model file.
pub const MODEL_HEADER: &str = "mocap-gapeval-ridge v1";

/// Accumulated `XᵀX` and `XᵀY` for a multi-output least-squares problem.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalEquations {
    gram: DMatrix<f64>,
    rhs: DMatrix<f64>,
    rows: usize,
}

impl NormalEquations {
    pub fn new(n_features: usize, n_targets: usize) -> Self {
        Self {
            gram: DMatrix::zeros(n_features, n_features),
            rhs: DMatrix::zeros(n_features, n_targets),
            rows: 0,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn add_row(&mut self, x: &[f64], y: &[f64]) {
        let xm = DMatrix::from_row_slice(1, x.len(), x);
        let ym = DMatrix::from_row_slice(1, y.len(), y);
        self.add_rows(&xm, &ym);
    }

    /// Add every row of `x` (features) with the matching row of `y` (targets).
    pub fn add_rows(&mut self, x: &DMatrix<f64>, y: &DMatrix<f64>) {
        assert_eq!(x.ncols(), self.gram.nrows(), "feature count");
        assert_eq!(y.ncols(), self.rhs.ncols(), "target count");
        assert_eq!(x.nrows(), y.nrows(), "row count");
        let xt = x.transpose();
        self.gram += &xt * x;
        self.rhs += &xt * y;
        self.rows += x.nrows();
    }

    /// Weights (`features × targets`) minimising `‖XW − Y‖² + reg‖W‖²`.
    pub fn solve(&self, regularization: f64) -> Result<DMatrix<f64>> {
        if !(regularization.is_finite() && regularization > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization strength must be > 0, got {regularization}"
            )));
        }
        let n = self.gram.nrows();
        let mut a = self.gram.clone();
        for i in 0..n {
            a[(i, i)] += regularization;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::Numeric("singular normal matrix".into()))?;
        let w = chol.solve(&self.rhs);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite ridge weights".into()));
        }
        Ok(w)
    }
}

/// Which channels make up a feature row.
///
/// A row for frame `t` holds, for every frame `s` in `t-w ..= t+w` (clamped
/// to the sequence), the hips-centered coordinates of all markers followed
/// by the three actor-offset channels, and finally a constant 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub marker_ids: Vec<String>,
    pub n_actors: usize,
    pub window: usize,
}

impl FeatureLayout {
    pub fn channels_per_frame(&self) -> usize {
        3 * self.marker_ids.len() + 3
    }

    pub fn n_features(&self) -> usize {
        (2 * self.window + 1) * self.channels_per_frame() + 1
    }

    /// Feature row of frame `t`.
    pub fn features(&self, centered: &CenteredSequence, t: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_features()];
        self.fill_row(centered, t, &mut out)?;
        Ok(out)
    }

    fn fill_row(&self, centered: &CenteredSequence, t: usize, out: &mut [f64]) -> Result<()> {
        let grid = centered.seq.full_positions()?;
        let last = grid.n_frames() - 1;
        let mut k = 0;
        for j in 0..=2 * self.window {
            let s = (t + j).saturating_sub(self.window).min(last);
            for p in grid.frame(s) {
                out[k..k + 3].copy_from_slice(p);
                k += 3;
            }
            out[k..k + 3].copy_from_slice(&centered.actor_offset[s]);
            k += 3;
        }
        out[k] = 1.0;
        Ok(())
    }

    /// Feature rows of every frame, one per row.
    fn matrix(&self, centered: &CenteredSequence) -> Result<DMatrix<f64>> {
        let t_len = centered.seq.n_frames();
        let f = self.n_features();
        let mut row = vec![0.0; f];
        let mut x = DMatrix::zeros(t_len, f);
        for t in 0..t_len {
            self.fill_row(centered, t, &mut row)?;
            for (c, v) in row.iter().enumerate() {
                x[(t, c)] = *v;
            }
        }
        Ok(x)
    }

    fn check(&self, seq: &MarkerSequence) -> Result<()> {
        if seq.marker_ids() != self.marker_ids.as_slice() {
            return Err(Error::Shape("sequence markers differ from the model's feature layout".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeConfig {
    /// Window radius `w`, frames.
    pub window: usize,
    pub regularization: f64,
    pub epochs: usize,
    pub curriculum: CurriculumParams,
    pub seed: u64,
    /// Train only the markers of one body part (for hips-outwards models).
    pub target_part: Option<BodyPart>,
    /// Reuse the epoch-0 corruption in every epoch.
    pub replay: bool,
    /// Upper bound, in bytes, on normal-equation storage held at once.
    pub memory_budget: usize,
}

impl RidgeConfig {
    pub fn new(window: usize, regularization: f64, epochs: usize, curriculum: CurriculumParams, seed: u64) -> Self {
        Self {
            window,
            regularization,
            epochs,
            curriculum,
            seed,
            target_part: None,
            replay: false,
            memory_budget: 512 << 20,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidArgument("window radius must be >= 1".into()));
        }
        if !(self.regularization.is_finite() && self.regularization > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization strength must be > 0, got {}",
                self.regularization
            )));
        }
        self.curriculum.validate()
    }
}

/// splitmix64 finaliser over the combined inputs.
fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut z = seed;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// One corrupted training input with its clean target.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    /// Gaps interpolated, then masked noise added; fully present.
    pub input: MarkerSequence,
    pub clean: MarkerSequence,
    pub mask: ObservationMask,
}

impl TrainingSample {
    /// The corruption `train_ridge` uses for sequence `index` at `epoch`.
    pub fn generate(
        clean: &MarkerSequence,
        skel: &SkeletonConfig,
        config: &RidgeConfig,
        index: usize,
        epoch: usize,
    ) -> Result<Self> {
        let ep = if config.replay { 0 } else { epoch };
        let (markers, duration) = curriculum(ep, &config.curriculum, clean.n_frames(), clean.n_markers());
        let spec = GapSpec {
            mode: GapMode::Window { markers, duration },
            seed: derive_seed(config.seed, &[index as u64, ep as u64, 0]),
        };
        let mask = sample_mask_for(clean, &spec, skel)?;
        let filled = interpolate_gaps(&apply_mask(clean, &mask)?)?;
        let sigma = noise_sigma(ep as f64, config.curriculum.noise_cap);
        let input = add_masked_noise(&filled, &mask, sigma, derive_seed(config.seed, &[index as u64, ep as u64, 1]))?;
        Ok(Self {
            input,
            clean: clean.clone(),
            mask,
        })
    }
}

/// Windowed linear denoiser. For every missing marker it predicts the
/// correction `clean − input` of its three coordinates from the feature row.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeDenoiser {
    regularization: f64,
    layout: FeatureLayout,
    /// `n_features × 3` per marker column; `None` for markers never missing
    /// during training, which keep their interpolated values.
    weights: Vec<Option<DMatrix<f64>>>,
    trained: bool,
}

pub fn train_ridge(clean: &[MarkerSequence], skel: &SkeletonConfig, config: &RidgeConfig) -> Result<RidgeDenoiser> {
    config.validate()?;
    if clean.is_empty() || config.epochs == 0 {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let first = &clean[0];
    let idx = skel.index_for(first.marker_ids())?;
    for (i, s) in clean.iter().enumerate() {
        if s.marker_ids() != first.marker_ids() {
            return Err(Error::Shape(format!("training sequence {i} has a different marker layout")));
        }
        if !s.is_fully_present() {
            return Err(Error::Missing(format!("training sequence {i} has absent markers")));
        }
        if s.n_frames() <= 2 * config.window + 1 {
            return Err(Error::InvalidArgument(format!(
                "training sequence {i} has {} frames; window radius {} needs more than {}",
                s.n_frames(),
                config.window,
                2 * config.window + 1
            )));
        }
    }
    let layout = FeatureLayout {
        marker_ids: first.marker_ids().to_vec(),
        n_actors: idx.n_actors,
        window: config.window,
    };
    let targets: Vec<usize> = match config.target_part {
        Some(p) => idx.parts[p.index()].clone(),
        None => (0..first.n_markers()).collect(),
    };
    let f = layout.n_features();
    let per_marker = 8 * (f * f + 3 * f);
    let chunk = (config.memory_budget / per_marker).max(1);

    let mut weights: Vec<Option<DMatrix<f64>>> = vec![None; first.n_markers()];
    for cols in targets.chunks(chunk) {
        let mut eqs: Vec<NormalEquations> = cols.iter().map(|_| NormalEquations::new(f, 3)).collect();
        for (i, seq) in clean.iter().enumerate() {
            for ep in 0..config.epochs {
                let sample = TrainingSample::generate(seq, skel, config, i, ep)?;
                if sample.mask.missing_count() == 0 {
                    continue;
                }
                let centered = center_hips(&sample.input, skel)?;
                let x = layout.matrix(&centered)?;
                let input = sample.input.full_positions()?;
                let target = sample.clean.full_positions()?;
                eqs.par_iter_mut().zip(cols).for_each(|(eq, &m)| {
                    let rows: Vec<usize> = (0..seq.n_frames()).filter(|&t| sample.mask.is_missing(t, m)).collect();
                    if rows.is_empty() {
                        return;
                    }
                    let xs = x.select_rows(rows.iter());
                    let ys = DMatrix::from_fn(rows.len(), 3, |r, c| sub(target.get(rows[r], m), input.get(rows[r], m))[c]);
                    eq.add_rows(&xs, &ys);
                });
            }
        }
        let solved: Vec<Result<Option<DMatrix<f64>>>> = eqs
            .par_iter()
            .map(|eq| {
                if eq.n_rows() == 0 {
                    Ok(None)
                } else {
                    eq.solve(config.regularization).map(Some)
                }
            })
            .collect();
        for (&m, w) in cols.iter().zip(solved) {
            weights[m] = w.map_err(|e| e.context(format!("marker {}", layout.marker_ids[m])))?;
        }
    }
    if weights.iter().all(Option::is_none) {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    Ok(RidgeDenoiser {
        regularization: config.regularization,
        layout,
        weights,
        trained: true,
    })
}

/// Interpolate the gaps of `corrupted`, then apply the model to every
/// missing entry.
pub fn fill_ridge(
    model: &RidgeDenoiser,
    corrupted: &MarkerSequence,
    mask: &ObservationMask,
    skel: &SkeletonConfig,
) -> Result<MarkerSequence> {
    model.ensure_trained()?;
    model.layout.check(corrupted)?;
    model.fill(&fill_interpolation(corrupted, mask)?, mask, skel)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    regularization: f64,
    layout: FeatureLayout,
    weights: Vec<MarkerWeights>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MarkerWeights {
    marker: String,
    /// Row-major `n_features × 3`.
    values: Vec<f64>,
}

impl RidgeDenoiser {
    pub fn untrained(layout: FeatureLayout, regularization: f64) -> Self {
        let n = layout.marker_ids.len();
        Self {
            regularization,
            layout,
            weights: vec![None; n],
            trained: false,
        }
    }

    pub fn window(&self) -> usize {
        self.layout.window
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn weights(&self, marker: usize) -> Option<&DMatrix<f64>> {
        self.weights.get(marker).and_then(Option::as_ref)
    }

    pub fn trained_markers(&self) -> Vec<&str> {
        self.weights
            .iter()
            .zip(&self.layout.marker_ids)
            .filter(|(w, _)| w.is_some())
            .map(|(_, id)| id.as_str())
            .collect()
    }

    fn ensure_trained(&self) -> Result<()> {
        if !self.trained {
            return Err(Error::InvalidArgument("ridge model is untrained".into()));
        }
        Ok(())
    }

    pub fn to_model_string(&self) -> Result<String> {
        self.ensure_trained()?;
        let weights = self
            .weights
            .iter()
            .zip(&self.layout.marker_ids)
            .filter_map(|(w, id)| {
                w.as_ref().map(|w| MarkerWeights {
                    marker: id.clone(),
                    values: (0..w.nrows()).flat_map(|r| (0..3).map(move |c| w[(r, c)])).collect(),
                })
            })
            .collect();
        let file = ModelFile {
            regularization: self.regularization,
            layout: self.layout.clone(),
            weights,
        };
        let body = serde_json::to_string(&file).map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(format!("{MODEL_HEADER}\n{body}\n"))
    }

    pub fn from_model_str(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        let origin = origin.as_ref();
        let (header, body) = text.split_once('\n').unwrap_or((text, ""));
        if header.trim_end() != MODEL_HEADER {
            return Err(Error::parse(origin, 1, format!("expected header {MODEL_HEADER:?}")));
        }
        let file: ModelFile =
            serde_json::from_str(body).map_err(|e| Error::parse(origin, e.line() as u64 + 1, e.to_string()))?;
        let layout = file.layout;
        if layout.window == 0 {
            return Err(Error::parse(origin, 2, "window radius must be >= 1"));
        }
        let f = layout.n_features();
        let mut weights = vec![None; layout.marker_ids.len()];
        for mw in file.weights {
            let m = layout
                .marker_ids
                .iter()
                .position(|id| *id == mw.marker)
                .ok_or_else(|| Error::parse(origin, 2, format!("weights for unknown marker {}", mw.marker)))?;
            if mw.values.len() != 3 * f {
                return Err(Error::parse(
                    origin,
                    2,
                    format!("marker {}: expected {} weights, got {}", mw.marker, 3 * f, mw.values.len()),
                ));
            }
            if mw.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(origin, 2, format!("marker {}: non-finite weight", mw.marker)));
            }
            weights[m] = Some(DMatrix::from_row_slice(f, 3, &mw.values));
        }
        Ok(Self {
            regularization: file.regularization,
            layout,
            weights,
            trained: true,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_model_string()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_model_str(&text, path)
    }
}

impl Reconstructor for RidgeDenoiser {
    /// `input` must already have its gaps interpolated.
    fn fill(&self, input: &MarkerSequence, mask: &ObservationMask, skel: &SkeletonConfig) -> Result<MarkerSequence> {
        self.ensure_trained()?;
        self.layout.check(input)?;
        mask.check_shape(input)?;
        let base = input.full_positions()?;
        let centered = center_hips(input, skel)?;
        let mut grid = base.clone();
        let mut row = vec![0.0; self.layout.n_features()];
        for t in 0..input.n_frames() {
            let cols: Vec<usize> = (0..input.n_markers())
                .filter(|&m| mask.is_missing(t, m) && self.weights[m].is_some())
                .collect();
            if cols.is_empty() {
                continue;
            }
            self.layout.fill_row(&centered, t, &mut row)?;
            for m in cols {
                let w = self.weights[m].as_ref().expect("filtered");
                let p = grid.get_mut(t, m);
                for (c, v) in p.iter_mut().enumerate() {
                    *v += w.column(c).iter().zip(&row).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        input.with_positions(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MarkerDef, PointGrid};
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

    fn wave(n: usize, phase: f64) -> MarkerSequence {
        let grid = PointGrid::from_fn(n, 4, |t, m| {
            let x = t as f64 / 30.0 + phase;
            [
                10.0 * x.sin() + m as f64 * 5.0,
                3.0 * (0.7 * x).cos() + m as f64,
                2.0 * (1.3 * x).sin() + 100.0,
            ]
        });
        MarkerSequence::from_full(grid, (0..4).map(|i| format!("A1:M{i}")).collect(), 120.0).unwrap()
    }

    fn params() -> CurriculumParams {
        CurriculumParams {
            n_start: 1.0,
            n_rate: 0.5,
            d_start: 5.0,
            d_rate: 1.0,
            noise_cap: 0.5,
            velocity_weight: 0.5,
        }
    }

    #[test]
    fn normal_equations_recover_exact_linear_map() {
        let truth = [[0.5, -1.0], [2.0, 0.25], [-0.75, 3.0]];
        let mut eq = NormalEquations::new(3, 2);
        for i in 0..50 {
            let x = [(i as f64 * 0.37).sin(), (i as f64 * 1.1).cos(), 1.0];
            let y: Vec<f64> = (0..2).map(|c| (0..3).map(|k| x[k] * truth[k][c]).sum()).collect();
            eq.add_row(&x, &y);
        }
        let w = eq.solve(1e-10).unwrap();
        for k in 0..3 {
            for c in 0..2 {
                assert!((w[(k, c)] - truth[k][c]).abs() < 1e-6);
            }
        }
        assert!(eq.solve(0.0).is_err());
    }

    #[test]
    fn zero_epochs_has_no_training_samples() {
        let cfg = RidgeConfig::new(1, 1.0, 0, params(), 1);
        let err = train_ridge(&[wave(60, 0.0)], &skel(), &cfg).unwrap_err();
        assert!(err.to_string().contains("no training samples"));
        let cfg = RidgeConfig::new(1, 1.0, 2, params(), 1);
        assert!(train_ridge(&[], &skel(), &cfg).unwrap_err().to_string().contains("no training samples"));
    }

    #[test]
    fn short_sequence_is_rejected() {
        let cfg = RidgeConfig::new(3, 1.0, 1, params(), 1);
        assert!(train_ridge(&[wave(7, 0.0)], &skel(), &cfg).is_err());
    }

    #[test]
    fn training_is_deterministic_and_round_trips() {
        let cfg = RidgeConfig::new(2, 0.1, 3, params(), 9);
        let data = [wave(80, 0.0), wave(80, 1.0)];
        let a = train_ridge(&data, &skel(), &cfg).unwrap();
        let b = train_ridge(&data, &skel(), &cfg).unwrap();
        assert_eq!(a, b);
        let text = a.to_model_string().unwrap();
        assert!(text.starts_with("mocap-gapeval-ridge v1\n"));
        let back = RidgeDenoiser::from_model_str(&text, "m").unwrap();
        assert_eq!(back, a);
        assert_eq!(back.to_model_string().unwrap(), text);
    }

    #[test]
    fn chunked_accumulation_matches_single_pass() {
        let mut cfg = RidgeConfig::new(1, 0.1, 2, params(), 4);
        let data = [wave(60, 0.3)];
        let whole = train_ridge(&data, &skel(), &cfg).unwrap();
        cfg.memory_budget = 1;
        assert_eq!(train_ridge(&data, &skel(), &cfg).unwrap(), whole);
    }

    #[test]
    fn gapless_fill_is_identity_and_untrained_fails() {
        let cfg = RidgeConfig::new(1, 0.1, 2, params(), 2);
        let model = train_ridge(&[wave(60, 0.0)], &skel(), &cfg).unwrap();
        let s = wave(40, 2.0);
        let mask = ObservationMask::all_observed(40, 4);
        assert_eq!(fill_ridge(&model, &s, &mask, &skel()).unwrap(), s);
        let untrained = RidgeDenoiser::untrained(model.layout().clone(), 1.0);
        let err = fill_ridge(&untrained, &s, &mask, &skel()).unwrap_err();
        assert!(err.to_string().contains("untrained"));
    }

    #[test]
    fn fill_keeps_observed_entries() {
        let cfg = RidgeConfig::new(2, 0.1, 4, params(), 3);
        let model = train_ridge(&[wave(90, 0.0), wave(90, 0.5)], &skel(), &cfg).unwrap();
        let s = wave(50, 1.7);
        let mut mask = ObservationMask::all_observed(50, 4);
        for t in 10..20 {
            mask.set(t, 2, false);
        }
        let out = fill_ridge(&model, &s, &mask, &skel()).unwrap();
        assert!(out.is_fully_present());
        for t in 0..50 {
            for m in 0..4 {
                if mask.is_observed(t, m) {
                    assert_eq!(out.get(t, m), s.get(t, m));
                }
            }
        }
    }
}
