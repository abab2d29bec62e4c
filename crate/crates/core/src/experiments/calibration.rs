use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{fit_alpha_per_problem, fmt_float, fmt_opt};
use crate::records::RevisionRecord;
use crate::report::Table;
use crate::simplex::entropy;
use crate::stats::{auroc, brier_score, expected_calibration_error};

pub const DEFAULT_BINS: usize = 10;

/// Confidence signals compared against answer correctness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    MaxProb,
    Margin,
    Entropy,
    Alpha,
}

impl Signal {
    pub const ALL: [Signal; 4] = [
        Signal::MaxProb,
        Signal::Margin,
        Signal::Entropy,
        Signal::Alpha,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Signal::MaxProb => "max_prob",
            Signal::Margin => "margin",
            Signal::Entropy => "entropy",
            Signal::Alpha => "alpha",
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignalMetrics {
    pub signal: Signal,
    /// Records that produced a value for this signal.
    pub n: usize,
    /// `None` when the labels contain a single class.
    pub auroc: Option<f64>,
    pub ece: f64,
    pub brier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationTable {
    pub n: usize,
    pub n_correct: usize,
    pub per_signal: Vec<SignalMetrics>,
    pub warnings: Vec<String>,
}

impl CalibrationTable {
    pub fn get(&self, signal: Signal) -> Option<&SignalMetrics> {
        self.per_signal.iter().find(|m| m.signal == signal)
    }

    pub fn to_table(&self, name: &str) -> Table {
        let mut t = Table::new(name, &["signal", "n", "n_correct", "auroc", "ece", "brier"]);
        for m in &self.per_signal {
            t.push(vec![
                m.signal.to_string(),
                m.n.to_string(),
                self.n_correct.to_string(),
                fmt_opt(m.auroc),
                fmt_float(m.ece),
                fmt_float(m.brier),
            ]);
        }
        t
    }
}

/// Metrics for one signal given its raw score (ranked for AUROC) and a
/// confidence in [0, 1] (binned for ECE, scored for Brier).
pub fn signal_metrics(
    signal: Signal,
    score: &[f64],
    confidence: &[f64],
    labels: &[bool],
    bins: usize,
) -> SignalMetrics {
    SignalMetrics {
        signal,
        n: labels.len(),
        auroc: auroc(score, labels),
        ece: expected_calibration_error(confidence, labels, bins),
        brier: brier_score(confidence, labels),
    }
}

fn top_two(p: &[f64]) -> (f64, f64) {
    p.iter()
        .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            if x > a {
                (x, a)
            } else {
                (a, b.max(x))
            }
        })
}

/// Compares max probability, top-two margin, entropy and the per-problem
/// exponent as predictors of whether `argmax q1` is the correct answer.
///
/// Confidences: max probability and margin are used as is, entropy maps to
/// `1 − H/ln K`, and α̂ is clamped to [0, 1]. Rankings use `−H` and raw α̂.
/// Records without a label are ignored; records without a per-problem fit
/// drop out of the α row only.
pub fn calibration_compare(records: &[RevisionRecord], bins: usize) -> Result<CalibrationTable> {
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be positive".into()));
    }
    let labelled: Vec<(&RevisionRecord, bool)> = records
        .iter()
        .filter_map(|r| r.is_correct().map(|c| (r, c)))
        .collect();
    if labelled.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let labels: Vec<bool> = labelled.iter().map(|(_, c)| *c).collect();
    let n_correct = labels.iter().filter(|c| **c).count();
    let mut warnings = Vec::new();
    if n_correct == 0 || n_correct == labels.len() {
        let msg = format!(
            "all {} labelled records are {}; AUROC undefined",
            labels.len(),
            if n_correct == 0 {
                "incorrect"
            } else {
                "correct"
            }
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let max_prob: Vec<f64> = labelled.iter().map(|(r, _)| r.q1.max_prob()).collect();
    let margin: Vec<f64> = labelled
        .iter()
        .map(|(r, _)| {
            let (a, b) = top_two(r.q1.probs());
            a - b
        })
        .collect();
    let neg_entropy: Vec<f64> = labelled
        .iter()
        .map(|(r, _)| -entropy(&r.q1).value())
        .collect();
    let entropy_conf: Vec<f64> = labelled
        .iter()
        .zip(&neg_entropy)
        .map(|((r, _), h)| (1.0 + h / (r.k() as f64).ln()).clamp(0.0, 1.0))
        .collect();

    let mut alpha = Vec::new();
    let mut alpha_labels = Vec::new();
    for (r, c) in &labelled {
        if let Ok(f) = fit_alpha_per_problem(r) {
            alpha.push(f.alpha);
            alpha_labels.push(*c);
        }
    }
    if alpha.len() < labelled.len() {
        let msg = format!(
            "{} records without a per-problem fit left out of the alpha signal",
            labelled.len() - alpha.len()
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let alpha_conf: Vec<f64> = alpha.iter().map(|a| a.clamp(0.0, 1.0)).collect();

    let per_signal = vec![
        signal_metrics(Signal::MaxProb, &max_prob, &max_prob, &labels, bins),
        signal_metrics(Signal::Margin, &margin, &margin, &labels, bins),
        signal_metrics(Signal::Entropy, &neg_entropy, &entropy_conf, &labels, bins),
        signal_metrics(Signal::Alpha, &alpha, &alpha_conf, &alpha_labels, bins),
    ];
    Ok(CalibrationTable {
        n: labels.len(),
        n_correct,
        per_signal,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{synthesize_records, SynthConfig};
    use crate::seeding::stream_rng;
    use rand::Rng;

    #[test]
    fn separable_signal() {
        let score = [0.1, 0.2, 0.8, 0.9];
        let labels = [false, false, true, true];
        let m = signal_metrics(Signal::MaxProb, &score, &score, &labels, DEFAULT_BINS);
        assert_eq!(m.auroc, Some(1.0));
    }

    #[test]
    fn label_independent_signal() {
        let mut rng = stream_rng(17, 0);
        let score: Vec<f64> = (0..10_000).map(|_| rng.random()).collect();
        let labels: Vec<bool> = (0..10_000).map(|_| rng.random_bool(0.5)).collect();
        let m = signal_metrics(Signal::MaxProb, &score, &score, &labels, DEFAULT_BINS);
        assert!((m.auroc.unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn confident_and_correct() {
        let ones = vec![1.0; 50];
        let labels = vec![true; 50];
        let m = signal_metrics(Signal::MaxProb, &ones, &ones, &labels, DEFAULT_BINS);
        assert_eq!(m.ece, 0.0);
        assert_eq!(m.brier, 0.0);
        assert_eq!(m.auroc, None);
    }

    #[test]
    fn synthetic_records_all_correct_warn() {
        let recs = synthesize_records(&SynthConfig::new(40, 4, 1.0).with_seed(4)).unwrap();
        let table = calibration_compare(&recs, DEFAULT_BINS).unwrap();
        assert_eq!(table.per_signal.len(), 4);
        for m in &table.per_signal {
            assert!((0.0..=1.0).contains(&m.ece));
            assert!((0.0..=2.0).contains(&m.brier));
        }
        if table.n_correct == table.n {
            assert!(!table.warnings.is_empty());
            assert!(table.per_signal.iter().all(|m| m.auroc.is_none()));
        }
        assert_eq!(table.to_table("calibration").rows.len(), 4);
    }

    #[test]
    fn mixed_labels_give_auroc() {
        let mut recs = synthesize_records(&SynthConfig::new(60, 4, 1.0).with_seed(5)).unwrap();
        for r in recs.iter_mut().take(20) {
            let wrong = (r.predicted_index() + 1) % r.k();
            r.correct_index = Some(wrong);
        }
        let table = calibration_compare(&recs, DEFAULT_BINS).unwrap();
        assert!(table.n_correct < table.n && table.n_correct > 0);
        for m in &table.per_signal {
            let a = m.auroc.unwrap();
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn top_two_margin() {
        assert_eq!(top_two(&[0.2, 0.5, 0.3]), (0.5, 0.3));
        assert_eq!(top_two(&[0.5, 0.5]), (0.5, 0.5));
    }
}
