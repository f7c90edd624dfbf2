use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KendallResult {
    pub tau: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n: usize,
}

/// Permutation enumeration is exact up to this many pairs.
const EXACT_MAX_N: usize = 10;

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} values paired with {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite value in rank correlation".into()));
    }
    Ok(())
}

fn sign(a: f64) -> i64 {
    if a > 0.0 {
        1
    } else if a < 0.0 {
        -1
    } else {
        0
    }
}

/// Concordant minus discordant pairs.
fn s_statistic(x: &[f64], y: &[f64]) -> i64 {
    let mut s = 0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += sign(x[j] - x[i]) * sign(y[j] - y[i]);
        }
    }
    s
}

/// Sizes of the groups of tied values.
fn tie_groups(v: &[f64]) -> Vec<usize> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mut out = vec![];
    let mut run = 1;
    for i in 1..s.len() {
        if s[i] == s[i - 1] {
            run += 1;
        } else {
            if run > 1 {
                out.push(run);
            }
            run = 1;
        }
    }
    if run > 1 {
        out.push(run);
    }
    out
}

fn tied_pairs(v: &[f64]) -> f64 {
    tie_groups(v).iter().map(|&t| (t * (t - 1) / 2) as f64).sum()
}

/// Tau-b of `x` against `y`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let n0 = (x.len() * (x.len() - 1) / 2) as f64;
    let (n1, n2) = (tied_pairs(x), tied_pairs(y));
    if n1 == n0 || n2 == n0 {
        return Err(Error::Undefined("Kendall tau with all values tied".into()));
    }
    Ok(s_statistic(x, y) as f64 / ((n0 - n1) * (n0 - n2)).sqrt())
}

/// Tau-a of `x` against `y` (no tie correction).
pub fn kendall_tau_a(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let n0 = (x.len() * (x.len() - 1) / 2) as f64;
    Ok(s_statistic(x, y) as f64 / n0)
}

/// Agreement between a smaller-is-better metric and a larger-is-better
/// rating: tau-b of the metric against the negated rating, so +1 means the
/// best metric value always belongs to the best-rated stimulus.
pub fn tau_statistic(metric: &[f64], rating: &[f64]) -> Result<f64> {
    let neg: Vec<f64> = rating.iter().map(|r| -r).collect();
    kendall_tau_b(metric, &neg)
}

/// [`tau_statistic`] with a two-sided p-value: exact by permutation for
/// `n <= 10`, tie-corrected normal approximation above.
pub fn kendall_tau(metric: &[f64], rating: &[f64]) -> Result<KendallResult> {
    let tau = tau_statistic(metric, rating)?;
    let neg: Vec<f64> = rating.iter().map(|r| -r).collect();
    let n = metric.len();
    let s = s_statistic(metric, &neg);
    let p_value = if n <= EXACT_MAX_N {
        if tie_groups(metric).is_empty() && tie_groups(&neg).is_empty() {
            exact_p_untied(n, s)
        } else {
            exact_p_permutation(metric, &neg, s)
        }
    } else {
        normal_p(metric, &neg, s)
    };
    Ok(KendallResult { tau, p_value, n })
}

/// Two-sided tail of the inversion-count distribution.
fn exact_p_untied(n: usize, s: i64) -> f64 {
    // counts[k] = permutations of n with k inversions
    let max_inv = n * (n - 1) / 2;
    let mut counts = vec![0f64; max_inv + 1];
    counts[0] = 1.0;
    for k in 2..=n {
        let mut next = vec![0f64; max_inv + 1];
        for (inv, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for add in 0..k {
                if inv + add <= max_inv {
                    next[inv + add] += c;
                }
            }
        }
        counts = next;
    }
    let total: f64 = counts.iter().sum();
    // s = n0 - 2 * inversions
    let n0 = max_inv as i64;
    let extreme: f64 = counts
        .iter()
        .enumerate()
        .filter(|(inv, _)| (n0 - 2 * *inv as i64).abs() >= s.abs())
        .map(|(_, c)| c)
        .sum();
    (extreme / total).min(1.0)
}

/// Share of all orderings of `y` whose |S| reaches the observed one.
fn exact_p_permutation(x: &[f64], y: &[f64], s_obs: i64) -> f64 {
    let n = y.len();
    let mut perm: Vec<f64> = y.to_vec();
    let mut c = vec![0usize; n];
    let (mut hit, mut total) = (0u64, 0u64);
    let mut visit = |p: &[f64]| {
        total += 1;
        if s_statistic(x, p).abs() >= s_obs.abs() {
            hit += 1;
        }
    };
    // Heap's algorithm
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hit as f64 / total as f64
}

fn normal_p(x: &[f64], y: &[f64], s: i64) -> f64 {
    let n = x.len() as f64;
    let tx = tie_groups(x);
    let ty = tie_groups(y);
    let sum = |g: &[usize], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t as f64)).sum::<f64>();
    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt = sum(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ty, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let t1 = sum(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ty, &|t| t * (t - 1.0) * (t - 2.0))
        / (9.0 * n * (n - 1.0) * (n - 2.0));
    let t2 = sum(&tx, &|t| t * (t - 1.0)) * sum(&ty, &|t| t * (t - 1.0)) / (2.0 * n * (n - 1.0));
    let var = (v0 - vt - vu) / 18.0 + t1 + t2;
    if var <= 0.0 {
        return 1.0;
    }
    let z = s as f64 / var.sqrt();
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_convention() {
        let m = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(tau_statistic(&m, &[4.0, 3.0, 2.0, 1.0]).unwrap(), 1.0);
        assert_eq!(tau_statistic(&m, &[1.0, 2.0, 3.0, 4.0]).unwrap(), -1.0);
    }

    #[test]
    fn all_tied_is_undefined() {
        let err = tau_statistic(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(err, Error::Undefined(_)));
        assert!(tau_statistic(&[1.0, 2.0], &[3.0, 3.0]).is_err());
    }

    #[test]
    fn exact_p_small_cases() {
        // n = 3, perfect order: 1 of 6 permutations at each extreme
        let r = kendall_tau(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert!((r.p_value - 2.0 / 6.0).abs() < 1e-15);
        // n = 4, perfect: 2 of 24
        let r = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert!((r.p_value - 2.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn untied_exact_agrees_with_enumeration() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0];
        let s = s_statistic(&x, &y);
        assert_eq!(exact_p_untied(6, s), exact_p_permutation(&x, &y, s));
    }

    #[test]
    fn normal_approx_close_to_exact_at_moderate_n() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y = [0.0, 2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 9.0, 7.0, 8.0];
        let s = s_statistic(&x, &y);
        let exact = exact_p_untied(10, s);
        let approx = normal_p(&x, &y, s);
        assert!((exact - approx).abs() < 0.01, "{exact} vs {approx}");
    }
}
