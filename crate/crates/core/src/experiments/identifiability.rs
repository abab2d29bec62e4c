use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::fmt_float;
use crate::estimation::{fit_alpha_pooled, fit_two_param};
use crate::records::{synthesize_records, PriorMode, SynthConfig};
use crate::report::Table;
use crate::seeding::derive_seed;
use crate::stats::{mean, median, sample_std};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityConfig {
    pub n_trials: usize,
    pub records_per_trial: usize,
    pub k: usize,
    pub alpha_true: f64,
    pub sigma: f64,
    pub seed: u64,
    /// `(name, prior)` arms compared.
    pub arms: Vec<(String, PriorMode)>,
}

impl Default for IdentifiabilityConfig {
    fn default() -> Self {
        Self {
            n_trials: 300,
            records_per_trial: 50,
            k: 4,
            alpha_true: 1.170,
            sigma: 0.1,
            seed: 0,
            arms: vec![
                ("uniform".into(), PriorMode::Uniform),
                ("dirichlet".into(), PriorMode::Dirichlet(0.5)),
                ("near_uniform".into(), PriorMode::Dirichlet(500.0)),
            ],
        }
    }
}

/// Spread of two-exponent fits across trials for one prior family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmReport {
    pub arm: String,
    pub prior: PriorMode,
    pub trials: usize,
    pub median_condition_number: f64,
    pub alpha_q0_mean: f64,
    pub alpha_q0_std: f64,
    pub alpha_b_mean: f64,
    pub alpha_b_std: f64,
    pub unified_alpha_mean: f64,
    pub unified_alpha_std: f64,
    /// Largest `|α̂ − α_true|` of the single-exponent fit over trials.
    pub unified_alpha_max_error: f64,
    pub median_delta_r_squared: f64,
    pub max_delta_r_squared: f64,
    pub unreliable_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiabilityReport {
    pub config: IdentifiabilityConfig,
    pub arms: Vec<ArmReport>,
}

impl IdentifiabilityReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == name)
    }

    pub fn to_table(&self, name: &str) -> Table {
        let mut t = Table::new(
            name,
            &[
                "arm",
                "prior",
                "trials",
                "median_condition_number",
                "alpha_q0_mean",
                "alpha_q0_std",
                "alpha_b_mean",
                "alpha_b_std",
                "unified_alpha_mean",
                "unified_alpha_std",
                "unified_alpha_max_error",
                "median_delta_r_squared",
                "max_delta_r_squared",
                "unreliable_trials",
            ],
        );
        for a in &self.arms {
            t.push(vec![
                a.arm.clone(),
                a.prior.to_string(),
                a.trials.to_string(),
                fmt_float(a.median_condition_number),
                fmt_float(a.alpha_q0_mean),
                fmt_float(a.alpha_q0_std),
                fmt_float(a.alpha_b_mean),
                fmt_float(a.alpha_b_std),
                fmt_float(a.unified_alpha_mean),
                fmt_float(a.unified_alpha_std),
                fmt_float(a.unified_alpha_max_error),
                fmt_float(a.median_delta_r_squared),
                fmt_float(a.max_delta_r_squared),
                a.unreliable_trials.to_string(),
            ]);
        }
        t
    }
}

struct Trial {
    cond: f64,
    alpha_q0: f64,
    alpha_b: f64,
    unified: f64,
    delta_r2: f64,
    reliable: bool,
}

/// Synthesizes single-exponent data under each prior family and measures
/// how well the two-exponent model is identified.
pub fn run_identifiability(config: &IdentifiabilityConfig) -> Result<IdentifiabilityReport> {
    if config.n_trials < 10 {
        return Err(Error::InvalidParameter(format!(
            "need at least 10 trials, got {}",
            config.n_trials
        )));
    }
    let arms = config
        .arms
        .iter()
        .enumerate()
        .map(|(ai, (name, prior))| {
            let arm_seed = derive_seed(config.seed, ai as u64);
            let trials: Vec<Trial> = (0..config.n_trials)
                .into_par_iter()
                .map(|t| {
                    let synth =
                        SynthConfig::new(config.records_per_trial, config.k, config.alpha_true)
                            .with_prior(*prior)
                            .with_sigma(config.sigma)
                            .with_seed(derive_seed(arm_seed, t as u64));
                    let recs = synthesize_records(&synth)?;
                    let two = fit_two_param(&recs)?;
                    let unified = fit_alpha_pooled(&recs)?;
                    Ok(Trial {
                        cond: two.condition_number,
                        alpha_q0: two.alpha_q0,
                        alpha_b: two.alpha_b,
                        unified: unified.alpha,
                        delta_r2: two.delta_r_squared_vs_unified,
                        reliable: two.reliable,
                    })
                })
                .collect::<Result<_>>()?;
            let col = |f: fn(&Trial) -> f64| trials.iter().map(f).collect::<Vec<f64>>();
            let (q0, b, uni, dr2) = (
                col(|t| t.alpha_q0),
                col(|t| t.alpha_b),
                col(|t| t.unified),
                col(|t| t.delta_r2),
            );
            Ok(ArmReport {
                arm: name.clone(),
                prior: *prior,
                trials: trials.len(),
                median_condition_number: median(&col(|t| t.cond)),
                alpha_q0_mean: mean(&q0),
                alpha_q0_std: sample_std(&q0),
                alpha_b_mean: mean(&b),
                alpha_b_std: sample_std(&b),
                unified_alpha_mean: mean(&uni),
                unified_alpha_std: sample_std(&uni),
                unified_alpha_max_error: uni
                    .iter()
                    .map(|a| (a - config.alpha_true).abs())
                    .fold(0.0, f64::max),
                median_delta_r_squared: median(&dr2),
                max_delta_r_squared: dr2.iter().copied().fold(0.0, f64::max),
                unreliable_trials: trials.iter().filter(|t| !t.reliable).count(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(IdentifiabilityReport {
        config: config.clone(),
        arms,
    })
}
