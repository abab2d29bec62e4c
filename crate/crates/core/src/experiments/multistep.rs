use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{
    bootstrap_ci, fit_alpha_per_problem, fmt_float, fmt_opt, geometric_mean_alpha,
    DEFAULT_RESAMPLES, MIN_BOOTSTRAP_RECORDS,
};
use crate::records::RevisionRecord;
use crate::report::Table;
use crate::seeding::derive_seed;
use crate::stats::{mean, ols_line, permutation_trend, sample_std, DEFAULT_PERMUTATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiStepConfig {
    /// Bootstrap resamples for each step's mean; 0 disables intervals.
    pub resamples: usize,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for MultiStepConfig {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSummary {
    pub step: u32,
    pub n: usize,
    pub alpha_mean: f64,
    pub alpha_std: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiStepSummary {
    pub per_step: Vec<StepSummary>,
    /// OLS slope of the step means on the step index.
    pub slope: f64,
    pub intercept: f64,
    pub slope_p: f64,
    pub slope_test: String,
    pub trend_r_squared: f64,
    /// Geometric mean of the step means; NaN if any mean is not positive.
    pub geo_mean: f64,
    /// Records without a usable per-problem fit.
    pub skipped: usize,
}

impl MultiStepSummary {
    pub fn step_means(&self) -> Vec<f64> {
        self.per_step.iter().map(|s| s.alpha_mean).collect()
    }

    pub fn to_table(&self, name: &str) -> Table {
        let mut t = Table::new(
            name,
            &[
                "step",
                "n",
                "alpha_mean",
                "alpha_std",
                "ci_low",
                "ci_high",
                "slope",
                "intercept",
                "slope_p",
                "trend_r_squared",
                "geo_mean",
            ],
        );
        for s in &self.per_step {
            t.push(vec![
                s.step.to_string(),
                s.n.to_string(),
                fmt_float(s.alpha_mean),
                fmt_float(s.alpha_std),
                fmt_opt(s.ci_low),
                fmt_opt(s.ci_high),
                fmt_float(self.slope),
                fmt_float(self.intercept),
                fmt_float(self.slope_p),
                fmt_float(self.trend_r_squared),
                fmt_float(self.geo_mean),
            ]);
        }
        t
    }
}

/// Per-step means of per-problem exponents, their linear trend over steps
/// with a permutation p-value, and the geometric mean across steps.
pub fn run_multistep_analysis(
    records: &[RevisionRecord],
    config: &MultiStepConfig,
) -> Result<MultiStepSummary> {
    let fits: Vec<Option<f64>> = records
        .par_iter()
        .map(|r| fit_alpha_per_problem(r).ok().map(|f| f.alpha))
        .collect();
    let mut by_step: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut skipped = 0;
    for (r, a) in records.iter().zip(fits) {
        match a {
            Some(a) => by_step.entry(r.step).or_default().push(a),
            None => skipped += 1,
        }
    }
    if by_step.len() < 3 {
        return Err(Error::InsufficientSteps { got: by_step.len() });
    }
    if skipped > 0 {
        log::warn!("multistep: {skipped} records without a per-problem fit skipped");
    }

    let per_step: Vec<StepSummary> = by_step
        .iter()
        .map(|(step, alphas)| {
            let (ci_low, ci_high) = if config.resamples > 0 && alphas.len() >= MIN_BOOTSTRAP_RECORDS
            {
                let (lo, hi) = bootstrap_ci(
                    alphas,
                    |s| Ok(s.iter().copied().sum::<f64>() / s.len() as f64),
                    config.resamples,
                    derive_seed(config.seed, u64::from(*step)),
                )?;
                (Some(lo), Some(hi))
            } else {
                (None, None)
            };
            Ok(StepSummary {
                step: *step,
                n: alphas.len(),
                alpha_mean: mean(alphas),
                alpha_std: sample_std(alphas),
                ci_low,
                ci_high,
            })
        })
        .collect::<Result<_>>()?;

    let x: Vec<f64> = per_step.iter().map(|s| f64::from(s.step)).collect();
    let y: Vec<f64> = per_step.iter().map(|s| s.alpha_mean).collect();
    let line = ols_line(&x, &y)?;
    let test = permutation_trend(&x, &y, config.permutations, config.seed)?;
    let geo_mean = geometric_mean_alpha(&y).map_or(f64::NAN, |g| g.geo_mean);
    Ok(MultiStepSummary {
        per_step,
        slope: line.slope,
        intercept: line.intercept,
        slope_p: test.p_value,
        slope_test: test.method,
        trend_r_squared: line.r_squared,
        geo_mean,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::AlphaSchedule;
    use crate::records::{synthesize_multistep, synthesize_records, SynthConfig};

    const SCHEDULE: [f64; 7] = [0.838, 0.815, 0.813, 0.784, 0.742, 0.737, 0.543];

    #[test]
    fn recovers_decaying_schedule() {
        let schedule = AlphaSchedule::per_step(SCHEDULE.to_vec()).unwrap();
        let cfg = SynthConfig::new(100, 4, 1.0).with_sigma(0.05).with_seed(3);
        let recs = synthesize_multistep(&cfg, &schedule, 7).unwrap();
        let summary = run_multistep_analysis(&recs, &MultiStepConfig::default()).unwrap();
        assert_eq!(summary.per_step.len(), 7);
        assert!(
            (summary.slope + 0.0397).abs() < 0.01,
            "slope {}",
            summary.slope
        );
        assert!((summary.geo_mean - 0.747).abs() < 0.02);
        assert!(summary.slope_p < 0.05);
        for (s, a) in summary.per_step.iter().zip(SCHEDULE) {
            assert!((s.alpha_mean - a).abs() < 0.01);
            assert!(s.ci_low.unwrap() <= s.ci_high.unwrap());
        }
    }

    #[test]
    fn needs_three_steps() {
        let recs = synthesize_records(&SynthConfig::new(10, 4, 1.0)).unwrap();
        assert!(matches!(
            run_multistep_analysis(&recs, &MultiStepConfig::default()),
            Err(Error::InsufficientSteps { got: 1 })
        ));
    }
}
