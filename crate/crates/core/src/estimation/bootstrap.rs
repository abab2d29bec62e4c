use rand::Rng;
use rayon::prelude::*;

use super::{moments_of, pooled_from_moments, FitResult, InterceptMode, Moments};
use crate::error::{Error, Result};
use crate::records::RevisionRecord;
use crate::seeding::stream_rng;
use crate::stats::percentile_sorted;

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const MIN_BOOTSTRAP_RECORDS: usize = 10;
const MIN_RESAMPLES: usize = 100;

fn check(n: usize, resamples: usize) -> Result<()> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_RESAMPLES} bootstrap resamples, got {resamples}"
        )));
    }
    if n < MIN_BOOTSTRAP_RECORDS {
        return Err(Error::InsufficientData {
            needed: MIN_BOOTSTRAP_RECORDS,
            got: n,
        });
    }
    Ok(())
}

fn draw_indices(n: usize, seed: u64, resample: usize) -> Vec<usize> {
    let mut rng = stream_rng(seed, resample as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Statistic evaluated on `resamples` with-replacement resamples of
/// `items`, in resample order. Resamples on which `stat` fails are skipped.
pub fn bootstrap_estimates<T, R, F>(
    items: &[T],
    stat: F,
    resamples: usize,
    seed: u64,
) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&[&T]) -> Result<R> + Sync,
{
    check(items.len(), resamples)?;
    let results: Vec<Result<R>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let sample: Vec<&T> = draw_indices(items.len(), seed, r)
                .into_iter()
                .map(|i| &items[i])
                .collect();
            stat(&sample)
        })
        .collect();
    let mut out = Vec::with_capacity(resamples);
    let mut first_err = None;
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let failed = resamples - out.len();
    if out.is_empty() {
        return Err(first_err.expect("no resample succeeded"));
    }
    if failed > 0 {
        log::warn!("{failed} of {resamples} bootstrap resamples could not be fitted");
    }
    Ok(out)
}

fn percentile_interval(mut values: Vec<f64>) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    (
        percentile_sorted(&values, 0.025),
        percentile_sorted(&values, 0.975),
    )
}

/// Percentile 95 % interval of `stat` over record resamples.
pub fn bootstrap_ci<T, F>(items: &[T], stat: F, resamples: usize, seed: u64) -> Result<(f64, f64)>
where
    T: Sync,
    F: Fn(&[&T]) -> Result<f64> + Sync,
{
    Ok(percentile_interval(bootstrap_estimates(
        items, stat, resamples, seed,
    )?))
}

/// Fast path for the pooled slope: per-record moments are computed once and
/// each resample only sums them. Draws the same resamples as
/// [`bootstrap_ci`] with the same seed.
pub fn bootstrap_pooled_alpha(
    records: &[RevisionRecord],
    mode: InterceptMode,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check(records.len(), resamples)?;
    let moments = moments_of(records);
    pooled_alpha_interval(&moments, mode, resamples, seed)
}

pub(crate) fn pooled_alpha_interval(
    moments: &[Moments],
    mode: InterceptMode,
    resamples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check(moments.len(), resamples)?;
    bootstrap_ci(
        moments,
        |sample| {
            let owned: Vec<Moments> = sample.iter().map(|m| **m).collect();
            Ok(pooled_from_moments(&owned, mode)?.alpha)
        },
        resamples,
        seed,
    )
}

/// Per-record-intercept pooled fit with a bootstrap interval attached.
pub fn fit_alpha_pooled_with_ci(
    records: &[RevisionRecord],
    mode: InterceptMode,
    resamples: usize,
    seed: u64,
) -> Result<FitResult> {
    let moments = moments_of(records);
    let mut fit = pooled_from_moments(&moments, mode)?;
    let (lo, hi) = pooled_alpha_interval(&moments, mode, resamples, seed)?;
    fit.ci_low = Some(lo);
    fit.ci_high = Some(hi);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::fit_alpha_pooled;
    use crate::records::{synthesize_records, SynthConfig};

    #[test]
    fn noiseless_interval_collapses() {
        let recs = synthesize_records(&SynthConfig::new(50, 4, 1.2).with_seed(1)).unwrap();
        let (lo, hi) = bootstrap_pooled_alpha(&recs, InterceptMode::PerRecord, 200, 3).unwrap();
        assert!(hi - lo < 1e-6);
        assert!((lo - 1.2).abs() < 1e-9);
    }

    #[test]
    fn fast_path_matches_generic_refit() {
        let cfg = SynthConfig::new(40, 4, 0.9).with_sigma(0.2).with_seed(4);
        let recs = synthesize_records(&cfg).unwrap();
        let generic = bootstrap_ci(
            &recs,
            |s| {
                let owned: Vec<RevisionRecord> = s.iter().map(|r| (*r).clone()).collect();
                Ok(fit_alpha_pooled(&owned)?.alpha)
            },
            300,
            17,
        )
        .unwrap();
        let fast = bootstrap_pooled_alpha(&recs, InterceptMode::PerRecord, 300, 17).unwrap();
        assert_eq!(generic, fast);
    }

    #[test]
    fn deterministic_and_validated() {
        let cfg = SynthConfig::new(30, 4, 1.0).with_sigma(0.1).with_seed(2);
        let recs = synthesize_records(&cfg).unwrap();
        let a = fit_alpha_pooled_with_ci(&recs, InterceptMode::PerRecord, 500, 7).unwrap();
        let b = fit_alpha_pooled_with_ci(&recs, InterceptMode::PerRecord, 500, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low.unwrap() < a.ci_high.unwrap());
        assert!(matches!(
            bootstrap_pooled_alpha(&recs, InterceptMode::PerRecord, 50, 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            bootstrap_pooled_alpha(&recs[..9], InterceptMode::PerRecord, 200, 0),
            Err(Error::InsufficientData { needed: 10, got: 9 })
        ));
    }
}
