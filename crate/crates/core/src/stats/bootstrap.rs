use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapInterval {
    pub lo: f64,
    pub hi: f64,
    /// Resamples whose statistic was defined.
    pub used: usize,
    /// Resamples skipped because the statistic was undefined.
    pub undefined: usize,
}

/// Percentile of sorted data with linear interpolation between order
/// statistics (position `q/100 · (n−1)`).
pub fn percentile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InvalidArgument("percentile of no values".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::InvalidArgument(format!("percentile {q} outside [0, 100]")));
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// 2.5/97.5 percentile interval of `statistic` over item-level resamples.
pub fn bootstrap_ci<T, F>(items: &[T], resamples: usize, seed: u64, statistic: F) -> Result<BootstrapInterval>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> Result<f64> + Sync,
{
    bootstrap_percentiles(items, resamples, seed, 2.5, 97.5, statistic)
}

/// Resample `items` with replacement `resamples` times and return the
/// `(q_lo, q_hi)` percentiles of the statistic. Resample `i` draws from
/// stream `i` of a ChaCha8 generator seeded with `seed`, so the result does
/// not depend on scheduling. Resamples where the statistic is undefined are
/// skipped; more than half undefined is an error.
pub fn bootstrap_percentiles<T, F>(
    items: &[T],
    resamples: usize,
    seed: u64,
    q_lo: f64,
    q_hi: f64,
    statistic: F,
) -> Result<BootstrapInterval>
where
    T: Clone + Sync,
    F: Fn(&[T]) -> Result<f64> + Sync,
{
    if items.len() < 2 {
        return Err(Error::InvalidArgument(format!("bootstrap needs at least 2 items, got {}", items.len())));
    }
    if resamples == 0 {
        return Err(Error::InvalidArgument("bootstrap needs at least one resample".into()));
    }
    if q_lo > q_hi {
        return Err(Error::InvalidArgument(format!("percentiles out of order: {q_lo} > {q_hi}")));
    }
    let n = items.len();
    let outcomes: Vec<Result<Option<f64>>> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let sample: Vec<T> = (0..n).map(|_| items[rng.random_range(0..n)].clone()).collect();
            match statistic(&sample) {
                Ok(v) if v.is_finite() => Ok(Some(v)),
                Ok(_) | Err(Error::Undefined(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut values = Vec::with_capacity(resamples);
    for o in outcomes {
        if let Some(v) = o? {
            values.push(v);
        }
    }
    let undefined = resamples - values.len();
    if 2 * undefined > resamples {
        return Err(Error::Undefined(format!(
            "statistic undefined on {undefined} of {resamples} bootstrap resamples"
        )));
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapInterval {
        lo: percentile(&values, q_lo)?,
        hi: percentile(&values, q_hi)?,
        used: values.len(),
        undefined,
    })
}
