//! Seeded analysis pipelines: ablations over candidate count, evidence
//! noise and evidence strength, multi-step trends, identifiability of the
//! two-exponent model, and confidence-signal calibration.

mod calibration;
mod identifiability;
mod k_ablation;
mod multistep;
mod noise;
mod sensitivity;
mod summary;

use serde::Serialize;

use crate::estimation::{fmt_float, fmt_opt, FitResult};
use crate::report::Table;

pub use calibration::{
    calibration_compare, signal_metrics, CalibrationTable, Signal, SignalMetrics, DEFAULT_BINS,
};
pub use identifiability::{
    run_identifiability, ArmReport, IdentifiabilityConfig, IdentifiabilityReport,
};
pub use k_ablation::{run_k_ablation, KAblationConfig};
pub use multistep::{run_multistep_analysis, MultiStepConfig, MultiStepSummary, StepSummary};
pub use noise::{run_noise_ablation, NoiseConfig, DEFAULT_FLIP_GRID};
pub use sensitivity::{run_evidence_sensitivity, SensitivityConfig};
pub use summary::{summarize_by_group, GroupFit, GroupSummary};

/// One level of an ablation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationLevel {
    pub level: f64,
    pub fit: FitResult,
    /// Spread of per-problem estimates, for levels built from them.
    pub alpha_std: Option<f64>,
    /// Mean `D_KL(b_noisy ‖ b_clean)`, for noise levels.
    pub kl_noisy_to_clean: Option<f64>,
    /// Records left out of this level.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationResult {
    pub factor: String,
    pub levels: Vec<AblationLevel>,
    pub test_statistic: f64,
    pub p_value: f64,
    pub test_method: String,
    /// Levels removed for having too few records.
    pub dropped_levels: Vec<f64>,
}

impl AblationResult {
    pub fn alphas(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.fit.alpha).collect()
    }

    pub fn r_squared(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.fit.r_squared).collect()
    }

    pub fn to_table(&self, name: &str) -> Table {
        let mut t = Table::new(
            name,
            &[
                "factor",
                "level",
                "method",
                "alpha",
                "alpha_std",
                "ci_low",
                "ci_high",
                "r_squared",
                "n_records",
                "n_points",
                "skipped",
                "kl_noisy_to_clean",
                "test_statistic",
                "p_value",
                "test_method",
            ],
        );
        for l in &self.levels {
            t.push(vec![
                self.factor.clone(),
                fmt_float(l.level),
                l.fit.method.as_str().into(),
                fmt_float(l.fit.alpha),
                fmt_opt(l.alpha_std),
                fmt_opt(l.fit.ci_low),
                fmt_opt(l.fit.ci_high),
                fmt_float(l.fit.r_squared),
                l.fit.n_records.to_string(),
                l.fit.n_points.to_string(),
                l.skipped.to_string(),
                fmt_opt(l.kl_noisy_to_clean),
                fmt_float(self.test_statistic),
                fmt_float(self.p_value),
                self.test_method.clone(),
            ]);
        }
        t
    }
}

/// True when every consecutive pair strictly decreases.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}
