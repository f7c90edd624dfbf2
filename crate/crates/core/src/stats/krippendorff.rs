use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::RatingsTable;

/// Value-by-value coincidences over all pairable units.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceMatrix {
    pub categories: Vec<i64>,
    /// `o[c][k]`, categories in order.
    pub counts: Vec<Vec<f64>>,
}

impl CoincidenceMatrix {
    /// Row sums `n_c`.
    pub fn marginals(&self) -> Vec<f64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.marginals().iter().sum()
    }
}

/// Each unit with `m ≥ 2` values adds `1/(m−1)` to `o[c][k]` for every
/// ordered pair of distinct raters valued `(c, k)`; single-value units add
/// nothing.
pub fn coincidence_matrix(ratings: &RatingsTable) -> Result<CoincidenceMatrix> {
    let units: Vec<Vec<i64>> = ratings.by_stimulus().into_values().collect();
    units_coincidence(&units, ratings.categories())
}

fn units_coincidence(units: &[Vec<i64>], categories: &[i64]) -> Result<CoincidenceMatrix> {
    let categories = categories.to_vec();
    let pos: BTreeMap<i64, usize> = categories.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let k = categories.len();
    let mut counts = vec![vec![0.0; k]; k];
    let mut pairable = false;
    for vals in units {
        let m = vals.len();
        if m < 2 {
            continue;
        }
        pairable = true;
        let w = 1.0 / (m - 1) as f64;
        for (i, a) in vals.iter().enumerate() {
            for (j, b) in vals.iter().enumerate() {
                if i != j {
                    let (Some(&pa), Some(&pb)) = (pos.get(a), pos.get(b)) else {
                        return Err(Error::InvalidArgument(format!("rating outside categories {categories:?}")));
                    };
                    counts[pa][pb] += w;
                }
            }
        }
    }
    if !pairable {
        return Err(Error::Undefined("no stimulus has two or more ratings".into()));
    }
    Ok(CoincidenceMatrix { categories, counts })
}

/// Krippendorff's alpha with the ordinal distance
/// `δ²(c,k) = (Σ_{g=c..k} n_g − (n_c + n_k)/2)²`.
pub fn krippendorff_alpha(ratings: &RatingsTable) -> Result<f64> {
    let units: Vec<Vec<i64>> = ratings.by_stimulus().into_values().collect();
    alpha_from_units(&units, ratings.categories())
}

/// [`krippendorff_alpha`] over raw units (the values each stimulus received).
pub fn alpha_from_units(units: &[Vec<i64>], categories: &[i64]) -> Result<f64> {
    let cm = units_coincidence(units, categories)?;
    let n_g = cm.marginals();
    let n = cm.total();
    let k = n_g.len();
    let delta = |c: usize, d: usize| -> f64 {
        let (lo, hi) = (c.min(d), c.max(d));
        let span: f64 = n_g[lo..=hi].iter().sum();
        let v = span - (n_g[lo] + n_g[hi]) / 2.0;
        v * v
    };
    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c == d {
                continue;
            }
            let w = delta(c, d);
            d_o += cm.counts[c][d] * w;
            d_e += n_g[c] * n_g[d] * w;
        }
    }
    d_o /= n;
    d_e /= n * (n - 1.0);
    if d_e == 0.0 {
        return Err(Error::Undefined("Krippendorff alpha with a single rated category".into()));
    }
    Ok(1.0 - d_o / d_e)
}
