//! Rating aggregation, Kendall rank correlation with bootstrap intervals,
//! and Krippendorff's alpha.

mod bootstrap;
mod kendall;
mod krippendorff;

pub use bootstrap::{bootstrap_ci, bootstrap_percentiles, percentile, BootstrapInterval};
pub use kendall::{kendall_tau, kendall_tau_a, kendall_tau_b, tau_statistic, KendallResult};
pub use krippendorff::{alpha_from_units, coincidence_matrix, krippendorff_alpha, CoincidenceMatrix};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{MetricName, RatingsTable};

#[derive(Clone, Debug, PartialEq)]
pub struct StimulusScore {
    pub mean: f64,
    pub count: usize,
    /// Share of ratings in each category, in category order.
    pub fractions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StimulusScores {
    pub categories: Vec<i64>,
    pub scores: BTreeMap<String, StimulusScore>,
}

impl StimulusScores {
    pub fn mean_of(&self, stimulus: &str) -> Option<f64> {
        self.scores.get(stimulus).map(|s| s.mean)
    }
}

/// Mean rating, count and category fractions per stimulus.
pub fn aggregate(ratings: &RatingsTable) -> Result<StimulusScores> {
    if ratings.is_empty() {
        return Err(Error::InvalidArgument("ratings table is empty".into()));
    }
    let categories = ratings.categories().to_vec();
    let scores = ratings
        .by_stimulus()
        .into_iter()
        .map(|(id, vals)| {
            let n = vals.len();
            let mean = vals.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            let fractions = categories
                .iter()
                .map(|c| vals.iter().filter(|&&v| v == *c).count() as f64 / n as f64)
                .collect();
            (id.to_string(), StimulusScore { mean, count: n, fractions })
        })
        .collect();
    Ok(StimulusScores { categories, scores })
}

/// One line of the correlation table.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationRow {
    pub metric: MetricName,
    pub tau: f64,
    pub p_value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_stimuli: usize,
}

/// Kendall tau, its p-value and a stimulus-level bootstrap interval for one
/// metric. `pairs` holds `(metric value, mean rating)` per stimulus.
pub fn correlate_metric(metric: MetricName, pairs: &[(f64, f64)], resamples: usize, seed: u64) -> Result<CorrelationRow> {
    let (m, r): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let k = kendall_tau(&m, &r)?;
    let ci = bootstrap_ci(pairs, resamples, seed, |sample| {
        let (m, r): (Vec<f64>, Vec<f64>) = sample.iter().copied().unzip();
        tau_statistic(&m, &r)
    })?;
    Ok(CorrelationRow {
        metric,
        tau: k.tau,
        p_value: k.p_value,
        ci_lo: ci.lo,
        ci_hi: ci.hi,
        n_stimuli: pairs.len(),
    })
}

pub const CORRELATION_HEADER: &str = "metric,tau,p_value,ci_lo,ci_hi,n_stimuli";

pub fn correlations_to_string(rows: &[CorrelationRow]) -> String {
    let mut out = String::from(CORRELATION_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.metric.as_str(),
            r.tau,
            r.p_value,
            r.ci_lo,
            r.ci_hi,
            r.n_stimuli
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rating;

    fn table(rows: &[(&str, &str, i64)]) -> RatingsTable {
        RatingsTable::new(
            rows.iter()
                .map(|(s, r, v)| Rating {
                    stimulus_id: s.to_string(),
                    rater_id: r.to_string(),
                    rating: *v,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn means_and_fractions() {
        let t = table(&[
            ("a", "r1", 4),
            ("b", "r1", 1),
            ("b", "r2", 5),
            ("c", "r1", 2),
            ("c", "r2", 3),
            ("c", "r3", 3),
            ("c", "r4", 4),
            ("c", "r5", 5),
        ]);
        let s = aggregate(&t).unwrap();
        assert_eq!(s.mean_of("a"), Some(4.0));
        assert_eq!(s.mean_of("b"), Some(3.0));
        assert!((s.mean_of("c").unwrap() - 3.4).abs() < 1e-12);
        let c = &s.scores["c"];
        assert_eq!(c.count, 5);
        assert_eq!(c.fractions, vec![0.0, 0.2, 0.4, 0.2, 0.2]);
    }

    #[test]
    fn empty_table_is_an_error() {
        assert!(aggregate(&RatingsTable::new(vec![]).unwrap()).is_err());
    }

    #[test]
    fn correlation_csv_layout() {
        let row = CorrelationRow {
            metric: MetricName::VdGt,
            tau: 0.5,
            p_value: 0.25,
            ci_lo: -0.1,
            ci_hi: 0.9,
            n_stimuli: 12,
        };
        assert_eq!(
            correlations_to_string(&[row]),
            "metric,tau,p_value,ci_lo,ci_hi,n_stimuli\nvd_gt,0.5,0.25,-0.1,0.9,12\n"
        );
    }
}
