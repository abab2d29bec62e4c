use rayon::prelude::*;
use serde::Serialize;

use super::{AblationLevel, AblationResult};
use crate::error::{Error, Result};
use crate::estimation::bootstrap::pooled_alpha_interval;
use crate::estimation::{pooled_from_moments, InterceptMode, Moments, DEFAULT_RESAMPLES};
use crate::evidence::{encode_evidence, DEFAULT_STRENGTH_GRID};
use crate::records::RevisionRecord;
use crate::seeding::derive_seed;
use crate::stats::{permutation_trend, DEFAULT_PERMUTATIONS};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityConfig {
    pub s_grid: Vec<f64>,
    /// Bootstrap resamples per level; 0 disables intervals.
    pub resamples: usize,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            s_grid: DEFAULT_STRENGTH_GRID.to_vec(),
            resamples: DEFAULT_RESAMPLES,
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

/// Re-encodes every record's evidence at each strength `s` and refits the
/// pooled exponent against the unchanged posteriors.
pub fn run_evidence_sensitivity(
    records: &[RevisionRecord],
    config: &SensitivityConfig,
) -> Result<AblationResult> {
    if config.s_grid.is_empty() {
        return Err(Error::InvalidParameter("empty strength grid".into()));
    }
    let levels: Vec<AblationLevel> = config
        .s_grid
        .par_iter()
        .enumerate()
        .map(|(li, &s)| {
            let mut moments = Vec::with_capacity(records.len());
            let mut skipped = 0;
            for r in records {
                let Some(c) = r.correct_index else {
                    skipped += 1;
                    continue;
                };
                match encode_evidence(r.k(), c, s) {
                    Ok(b) => {
                        moments.push(Moments::from_parts(r.q0.probs(), b.probs(), r.q1.probs()))
                    }
                    Err(_) => skipped += 1,
                }
            }
            if skipped > 0 {
                log::warn!("s = {s}: {skipped} records skipped");
            }
            let mut fit = pooled_from_moments(&moments, InterceptMode::PerRecord)?;
            if config.resamples > 0 {
                let (lo, hi) = pooled_alpha_interval(
                    &moments,
                    InterceptMode::PerRecord,
                    config.resamples,
                    derive_seed(config.seed, li as u64),
                )?;
                fit.ci_low = Some(lo);
                fit.ci_high = Some(hi);
            }
            Ok(AblationLevel {
                level: s,
                fit,
                alpha_std: None,
                kl_noisy_to_clean: None,
                skipped,
            })
        })
        .collect::<Result<_>>()?;

    let (statistic, p_value, method) = if levels.len() >= 2 {
        let x: Vec<f64> = levels.iter().map(|l| l.level).collect();
        let y: Vec<f64> = levels.iter().map(|l| l.fit.alpha).collect();
        let t = permutation_trend(&x, &y, config.permutations, config.seed)?;
        (t.statistic, t.p_value, t.method)
    } else {
        (f64::NAN, 1.0, "no contrast: single level".to_string())
    };
    Ok(AblationResult {
        factor: "s".into(),
        levels,
        test_statistic: statistic,
        p_value,
        test_method: method,
        dropped_levels: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::fit_alpha_pooled;
    use crate::experiments::strictly_decreasing;
    use crate::records::{synthesize_records, PriorMode, SynthConfig};

    #[test]
    fn stronger_evidence_lowers_the_fitted_exponent() {
        let cfg = SynthConfig::new(300, 4, 1.0)
            .with_prior(PriorMode::Uniform)
            .with_sigma(0.1)
            .with_seed(12);
        let recs = synthesize_records(&cfg).unwrap();
        let res = run_evidence_sensitivity(
            &recs,
            &SensitivityConfig {
                resamples: 200,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(strictly_decreasing(&res.alphas()), "{:?}", res.alphas());
        let n: Vec<usize> = res.levels.iter().map(|l| l.fit.n_points).collect();
        assert!(n.iter().all(|x| *x == n[0]));
    }

    #[test]
    fn generating_strength_is_self_consistent() {
        let recs = synthesize_records(&SynthConfig::new(100, 5, 1.3).with_seed(2)).unwrap();
        let res = run_evidence_sensitivity(
            &recs,
            &SensitivityConfig {
                s_grid: vec![0.9],
                resamples: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((res.levels[0].fit.alpha - 1.3).abs() < 1e-9);
        assert_eq!(res.levels[0].fit, fit_alpha_pooled(&recs).unwrap());
    }

    #[test]
    fn invalid_strength_skips_small_k() {
        let mut recs = synthesize_records(&SynthConfig::new(20, 2, 1.0)).unwrap();
        recs.extend(synthesize_records(&SynthConfig::new(20, 8, 1.0).with_seed(1)).unwrap());
        let res = run_evidence_sensitivity(
            &recs,
            &SensitivityConfig {
                s_grid: vec![0.3, 0.9],
                resamples: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(res.levels[0].skipped, 20);
        assert_eq!(res.levels[1].skipped, 0);
    }
}
