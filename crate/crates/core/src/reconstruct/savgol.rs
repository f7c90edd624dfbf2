use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{MarkerSequence, ObservationMask, PointGrid};

/// How the filter treats the first and last `window / 2` samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EdgeMode {
    /// Evaluate the polynomial fitted to the first (last) full window.
    #[default]
    Interp,
    /// Reflect the signal about its end samples (`d c b | a b c d | c b a`).
    Mirror,
}

/// Which entries receive smoothed values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SmoothScope {
    #[default]
    All,
    Gaps,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingParams {
    pub window: usize,
    pub order: usize,
    pub scope: SmoothScope,
    pub edges: EdgeMode,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self {
            window: 9,
            order: 3,
            scope: SmoothScope::All,
            edges: EdgeMode::Interp,
        }
    }
}

fn check(window: usize, order: usize) -> Result<()> {
    if window.is_multiple_of(2) || window < 3 {
        return Err(Error::InvalidArgument(format!("Savitzky-Golay window must be odd and >= 3, got {window}")));
    }
    if order >= window {
        return Err(Error::InvalidArgument(format!(
            "Savitzky-Golay order {order} must be below the window {window}"
        )));
    }
    Ok(())
}

/// Weights that evaluate the least-squares polynomial of degree `order`,
/// fitted to `window` samples, at sample `position` (0-based within the
/// window). The centre position gives the usual smoothing kernel.
pub fn savgol_coefficients(window: usize, order: usize, position: usize) -> Result<Vec<f64>> {
    check(window, order)?;
    let half = (window / 2) as f64;
    let vander = DMatrix::from_fn(window, order + 1, |i, k| (i as f64 - half).powi(k as i32));
    let x0 = position as f64 - half;
    let at = DVector::from_fn(order + 1, |k, _| x0.powi(k as i32));
    let gram = vander.transpose() * &vander;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Numeric("singular Savitzky-Golay design".into()))?;
    let a = chol.solve(&at);
    Ok((vander * a).iter().copied().collect())
}

/// Smooth one signal. The signal must be at least one window long.
pub fn savgol_smooth(signal: &[f64], window: usize, order: usize, edges: EdgeMode) -> Result<Vec<f64>> {
    check(window, order)?;
    let n = signal.len();
    if n < window {
        return Err(Error::InvalidArgument(format!(
            "signal of {n} samples is shorter than the window {window}"
        )));
    }
    let half = window / 2;
    let center = savgol_coefficients(window, order, half)?;
    let mut out = vec![0.0; n];
    for i in half..n - half {
        out[i] = dot(&center, &signal[i - half..=i + half]);
    }
    match edges {
        EdgeMode::Interp => {
            for j in 0..half {
                let w = savgol_coefficients(window, order, j)?;
                out[j] = dot(&w, &signal[..window]);
                let w = savgol_coefficients(window, order, window - 1 - j)?;
                out[n - 1 - j] = dot(&w, &signal[n - window..]);
            }
        }
        EdgeMode::Mirror => {
            let at = |k: isize| -> f64 {
                let last = (n - 1) as isize;
                let idx = if k < 0 {
                    -k
                } else if k > last {
                    2 * last - k
                } else {
                    k
                };
                signal[idx as usize]
            };
            for i in (0..half).chain(n - half..n) {
                out[i] = center
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * at(i as isize + k as isize - half as isize))
                    .sum();
            }
        }
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restore observed entries from `original`, then smooth every coordinate
/// trajectory with a Savitzky-Golay filter.
pub fn postprocess(
    pred: &MarkerSequence,
    original: &MarkerSequence,
    mask: &ObservationMask,
    params: &SmoothingParams,
) -> Result<MarkerSequence> {
    check(params.window, params.order)?;
    pred.same_shape(original)?;
    mask.check_shape(pred)?;
    let mut grid = pred.full_positions()?.clone();
    for t in 0..pred.n_frames() {
        for m in 0..pred.n_markers() {
            if mask.is_observed(t, m) {
                if let Some(p) = original.get(t, m) {
                    grid.set(t, m, p);
                }
            }
        }
    }
    let restored = grid.clone();
    let mut signal = vec![0.0; pred.n_frames()];
    for m in 0..pred.n_markers() {
        for c in 0..3 {
            for (t, v) in signal.iter_mut().enumerate() {
                *v = restored.get(t, m)[c];
            }
            let smooth = savgol_smooth(&signal, params.window, params.order, params.edges)?;
            for (t, v) in smooth.into_iter().enumerate() {
                if params.scope == SmoothScope::All || mask.is_missing(t, m) {
                    grid.get_mut(t, m)[c] = v;
                }
            }
        }
    }
    pred.with_positions(PointGrid::clone(&grid))
}
