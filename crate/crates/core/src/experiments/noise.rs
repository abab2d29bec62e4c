use rayon::prelude::*;
use serde::Serialize;

use super::{AblationLevel, AblationResult};
use crate::error::{Error, Result};
use crate::estimation::{pooled_from_moments, InterceptMode, Moments};
use crate::evidence::inject_flip_noise;
use crate::records::RevisionRecord;
use crate::seeding::stream_rng;
use crate::simplex::kl_divergence;
use crate::stats::{permutation_trend, DEFAULT_PERMUTATIONS};

pub const DEFAULT_FLIP_GRID: [f64; 3] = [0.0, 0.2, 0.4];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseConfig {
    pub flip_grid: Vec<f64>,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            flip_grid: DEFAULT_FLIP_GRID.to_vec(),
            permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

/// Corrupts each record's evidence with probability `p_flip` and refits the
/// pooled exponent against the original posteriors.
///
/// Record `j` draws from the same generator at every level, so a record
/// flipped at a lower rate is also flipped at every higher rate. Records
/// without a known correct index are skipped.
pub fn run_noise_ablation(
    records: &[RevisionRecord],
    config: &NoiseConfig,
) -> Result<AblationResult> {
    if config.flip_grid.is_empty() {
        return Err(Error::InvalidParameter("empty flip grid".into()));
    }
    let eligible: Vec<&RevisionRecord> = records
        .iter()
        .filter(|r| r.correct_index.is_some() && r.evidence.correct_index().is_some())
        .collect();
    let skipped = records.len() - eligible.len();
    if skipped > 0 {
        log::warn!("noise ablation: {skipped} records without a correct index skipped");
    }

    let levels: Vec<AblationLevel> = config
        .flip_grid
        .par_iter()
        .map(|&p| {
            let mut moments = Vec::with_capacity(eligible.len());
            let mut kl_sum = 0.0;
            for (j, r) in eligible.iter().enumerate() {
                let mut rng = stream_rng(config.seed, j as u64);
                let noisy = inject_flip_noise(&r.evidence, p, &mut rng)?;
                kl_sum += kl_divergence(noisy.dist(), r.evidence.dist())?.value();
                moments.push(Moments::from_parts(
                    r.q0.probs(),
                    noisy.probs(),
                    r.q1.probs(),
                ));
            }
            let fit = pooled_from_moments(&moments, InterceptMode::PerRecord)?;
            Ok(AblationLevel {
                level: p,
                fit,
                alpha_std: None,
                kl_noisy_to_clean: Some(kl_sum / eligible.len() as f64),
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
        factor: "p_flip".into(),
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
    use crate::records::{synthesize_records, SynthConfig};

    #[test]
    fn zero_flip_matches_clean_fit() {
        let recs = synthesize_records(&SynthConfig::new(200, 4, 1.163).with_sigma(0.1)).unwrap();
        let res = run_noise_ablation(
            &recs,
            &NoiseConfig {
                flip_grid: vec![0.0],
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(res.levels[0].fit, fit_alpha_pooled(&recs).unwrap());
        assert_eq!(res.levels[0].kl_noisy_to_clean, Some(0.0));
    }

    #[test]
    fn flips_attenuate_alpha_and_fit() {
        let cfg = SynthConfig::new(1000, 4, 1.163)
            .with_sigma(0.1)
            .with_seed(6);
        let recs = synthesize_records(&cfg).unwrap();
        let res = run_noise_ablation(&recs, &NoiseConfig::default()).unwrap();
        assert!(strictly_decreasing(&res.alphas()), "{:?}", res.alphas());
        assert!(
            strictly_decreasing(&res.r_squared()),
            "{:?}",
            res.r_squared()
        );
        let kl: Vec<f64> = res
            .levels
            .iter()
            .map(|l| l.kl_noisy_to_clean.unwrap())
            .collect();
        assert!(kl.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn records_without_labels_are_skipped() {
        let mut recs = synthesize_records(&SynthConfig::new(30, 4, 1.0)).unwrap();
        recs[0].correct_index = None;
        let res = run_noise_ablation(&recs, &NoiseConfig::default()).unwrap();
        assert_eq!(res.levels[0].skipped, 1);
        assert_eq!(res.levels[0].fit.n_records, 29);
    }
}
