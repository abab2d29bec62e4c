use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{AblationLevel, AblationResult};
use crate::error::Result;
use crate::estimation::{
    fit_alpha_per_problem, FitMethod, FitResult, InterceptMode, DEFAULT_R2_THRESHOLD,
};
use crate::records::RevisionRecord;
use crate::stats::{mean, permutation_anova, sample_std, DEFAULT_PERMUTATIONS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KAblationConfig {
    pub r2_threshold: f64,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for KAblationConfig {
    fn default() -> Self {
        Self {
            r2_threshold: DEFAULT_R2_THRESHOLD,
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

fn level_fit(fits: &[FitResult]) -> FitResult {
    let alphas: Vec<f64> = fits.iter().map(|f| f.alpha).collect();
    FitResult {
        alpha: mean(&alphas),
        intercept: mean(&fits.iter().map(|f| f.intercept).collect::<Vec<_>>()),
        r_squared: mean(&fits.iter().map(|f| f.r_squared).collect::<Vec<_>>()),
        n_points: fits.iter().map(|f| f.n_points).sum(),
        n_records: fits.len(),
        ci_low: None,
        ci_high: None,
        method: FitMethod::PerProblem,
        intercepts: InterceptMode::PerRecord,
    }
}

/// Groups per-problem exponents (kept when R² exceeds the threshold) by
/// candidate count and tests for any difference between groups with a
/// permutation one-way ANOVA.
pub fn run_k_ablation(
    records: &[RevisionRecord],
    config: &KAblationConfig,
) -> Result<AblationResult> {
    let fits: Vec<Option<FitResult>> = records
        .par_iter()
        .map(|r| fit_alpha_per_problem(r).ok())
        .collect();
    let mut by_k: BTreeMap<usize, Vec<FitResult>> = BTreeMap::new();
    let mut skipped: BTreeMap<usize, usize> = BTreeMap::new();
    for (r, fit) in records.iter().zip(fits) {
        match fit {
            Some(f) if f.r_squared > config.r2_threshold => by_k.entry(r.k()).or_default().push(f),
            _ => *skipped.entry(r.k()).or_default() += 1,
        }
    }

    let mut dropped = Vec::new();
    let mut levels = Vec::new();
    let mut values = Vec::new();
    let mut groups = Vec::new();
    for (k, fits) in &by_k {
        if fits.len() < 2 {
            log::warn!(
                "dropping K = {k}: only {} fit(s) pass the R² filter",
                fits.len()
            );
            dropped.push(*k as f64);
            continue;
        }
        let alphas: Vec<f64> = fits.iter().map(|f| f.alpha).collect();
        let g = levels.len();
        values.extend_from_slice(&alphas);
        groups.extend(std::iter::repeat_n(g, alphas.len()));
        levels.push(AblationLevel {
            level: *k as f64,
            fit: level_fit(fits),
            alpha_std: Some(sample_std(&alphas)),
            kl_noisy_to_clean: None,
            skipped: skipped.get(k).copied().unwrap_or(0),
        });
    }

    let (statistic, p_value, method) = if levels.len() < 2 {
        (
            f64::NAN,
            1.0,
            "no contrast: fewer than two K levels".to_string(),
        )
    } else {
        let t = permutation_anova(&values, &groups, config.permutations, config.seed)?;
        (t.statistic, t.p_value, t.method)
    };
    Ok(AblationResult {
        factor: "k".into(),
        levels,
        test_statistic: statistic,
        p_value,
        test_method: method,
        dropped_levels: dropped,
    })
}
