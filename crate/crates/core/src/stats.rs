//! Small statistics kit: descriptive summaries, simple regression,
//! permutation tests and calibration metrics.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seeding::stream_rng;

/// Default Monte Carlo permutation count.
pub const DEFAULT_PERMUTATIONS: usize = 9999;

/// Trend tests over at most this many points enumerate every permutation.
pub const EXACT_PERMUTATION_LIMIT: usize = 8;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for a single value.
pub fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, 0.5)
}

/// Linearly interpolated quantile `q ∈ [0, 1]` of sorted data.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x` with an intercept.
pub fn ols_line(x: &[f64], y: &[f64]) -> Result<Line> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: x.len(),
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::DegenerateDesign);
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(Line {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationTest {
    pub statistic: f64,
    pub p_value: f64,
    /// Number of relabellings compared against.
    pub permutations: usize,
    pub method: String,
}

fn f_statistic(values: &[f64], groups: &[usize], n_groups: usize) -> f64 {
    let mut sums = vec![0.0; n_groups];
    let mut counts = vec![0usize; n_groups];
    for (v, g) in values.iter().zip(groups) {
        sums[*g] += v;
        counts[*g] += 1;
    }
    let grand = mean(values);
    let ssb: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, c)| **c > 0)
        .map(|(s, c)| *c as f64 * (s / *c as f64 - grand).powi(2))
        .sum();
    let sst: f64 = values.iter().map(|v| (v - grand).powi(2)).sum();
    let ssw = (sst - ssb).max(0.0);
    let df_b = (n_groups - 1) as f64;
    let df_w = (values.len() - n_groups) as f64;
    (ssb / df_b) / (ssw / df_w)
}

/// One-way ANOVA F statistic for `values` labelled `0..g` by `groups`.
pub fn one_way_f(values: &[f64], groups: &[usize]) -> Result<f64> {
    let n_groups = check_groups(values, groups)?;
    Ok(f_statistic(values, groups, n_groups))
}

fn check_groups(values: &[f64], groups: &[usize]) -> Result<usize> {
    if values.len() != groups.len() {
        return Err(Error::Dimension {
            expected: values.len(),
            got: groups.len(),
        });
    }
    let n_groups = groups.iter().max().map_or(0, |m| m + 1);
    if n_groups < 2 || values.len() <= n_groups {
        return Err(Error::InsufficientData {
            needed: n_groups.max(2) + 1,
            got: values.len(),
        });
    }
    Ok(n_groups)
}

/// ANOVA F with a p-value from `n_perm` random relabellings:
/// `(1 + #{F* >= F}) / (1 + n_perm)`.
pub fn permutation_anova(
    values: &[f64],
    groups: &[usize],
    n_perm: usize,
    seed: u64,
) -> Result<PermutationTest> {
    let n_groups = check_groups(values, groups)?;
    let observed = f_statistic(values, groups, n_groups);
    let method = format!("one-way ANOVA F, {n_perm} label permutations");
    if observed.is_nan() {
        return Ok(PermutationTest {
            statistic: observed,
            p_value: 1.0,
            permutations: n_perm,
            method,
        });
    }
    let threshold = observed * (1.0 - 1e-12);
    let exceed = (0..n_perm)
        .into_par_iter()
        .filter(|i| {
            let mut rng = stream_rng(seed, *i as u64);
            let mut labels = groups.to_vec();
            labels.shuffle(&mut rng);
            f_statistic(values, &labels, n_groups) >= threshold
        })
        .count();
    Ok(PermutationTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + n_perm) as f64,
        permutations: n_perm,
        method,
    })
}

fn slope_of(x: &[f64], y: &[f64], mx: f64, sxx: f64) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - mx) * b).sum::<f64>() / sxx
}

/// Two-sided test of an OLS slope by permuting `y` against `x`.
///
/// Up to [`EXACT_PERMUTATION_LIMIT`] points every ordering is enumerated
/// (the observed one included) and the p-value is exact; beyond that
/// `n_perm` random orderings are drawn.
pub fn permutation_trend(
    x: &[f64],
    y: &[f64],
    n_perm: usize,
    seed: u64,
) -> Result<PermutationTest> {
    let line = ols_line(x, y)?;
    let mx = mean(x);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let observed = line.slope;
    let threshold = observed.abs() * (1.0 - 1e-12);

    if x.len() <= EXACT_PERMUTATION_LIMIT {
        let mut perm = y.to_vec();
        let n = perm.len();
        let mut c = vec![0usize; n];
        let mut total = 1usize;
        let mut hits = usize::from(slope_of(x, &perm, mx, sxx).abs() >= threshold);
        // Heap's algorithm.
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                total += 1;
                hits += usize::from(slope_of(x, &perm, mx, sxx).abs() >= threshold);
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        return Ok(PermutationTest {
            statistic: observed,
            p_value: hits as f64 / total as f64,
            permutations: total,
            method: format!("OLS slope, exact enumeration of {total} orderings"),
        });
    }

    let exceed = (0..n_perm)
        .into_par_iter()
        .filter(|i| {
            let mut rng = stream_rng(seed, *i as u64);
            let mut perm = y.to_vec();
            perm.shuffle(&mut rng);
            slope_of(x, &perm, mx, sxx).abs() >= threshold
        })
        .count();
    Ok(PermutationTest {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + n_perm) as f64,
        permutations: n_perm,
        method: format!("OLS slope, {n_perm} random permutations"),
    })
}

/// Area under the ROC curve for `scores` predicting `labels`, ties counted
/// half. `None` when only one class is present.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their average.
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Expected calibration error over `bins` equal-width bins on [0, 1]:
/// the count-weighted mean of |accuracy − mean confidence| per bin.
pub fn expected_calibration_error(confidence: &[f64], labels: &[bool], bins: usize) -> f64 {
    assert_eq!(confidence.len(), labels.len());
    assert!(bins > 0);
    if confidence.is_empty() {
        return 0.0;
    }
    let mut conf_sum = vec![0.0; bins];
    let mut hits = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (c, l) in confidence.iter().zip(labels) {
        let b = ((c * bins as f64).floor() as usize).min(bins - 1);
        conf_sum[b] += c;
        hits[b] += f64::from(u8::from(*l));
        counts[b] += 1;
    }
    let n = confidence.len() as f64;
    (0..bins)
        .filter(|b| counts[*b] > 0)
        .map(|b| (hits[b] - conf_sum[b]).abs() / n)
        .sum()
}

/// Mean squared difference between confidence and the 0/1 outcome.
pub fn brier_score(confidence: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(confidence.len(), labels.len());
    if confidence.is_empty() {
        return 0.0;
    }
    confidence
        .iter()
        .zip(labels)
        .map(|(c, l)| (c - f64::from(u8::from(*l))).powi(2))
        .sum::<f64>()
        / confidence.len() as f64
}

/// Kolmogorov–Smirnov distance between the sample and Uniform(0, 1).
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}
