use std::collections::BTreeMap;

use serde::Serialize;

use super::{RevisionRecord, SourceMethod};

/// Models whose fallback share exceeds this are dropped entirely.
pub const DEFAULT_FALLBACK_THRESHOLD: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterPolicy {
    pub fallback_rate_threshold: f64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            fallback_rate_threshold: DEFAULT_FALLBACK_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct QualityReport {
    pub total: usize,
    pub kept: usize,
    pub fallback_rate: f64,
    pub invalid_rate: f64,
    pub per_model_contamination: BTreeMap<String, f64>,
    pub excluded_models: Vec<String>,
}

impl QualityReport {
    /// Folds lines rejected at parse time into the totals.
    pub fn count_invalid(&mut self, invalid: usize) {
        let valid = self.total;
        self.total += invalid;
        if self.total > 0 {
            self.invalid_rate = invalid as f64 / self.total as f64;
            self.fallback_rate *= valid as f64 / self.total as f64;
        }
    }
}

/// Keeps directly elicited records of models whose fallback share is at
/// most the threshold. Input order is preserved.
pub fn quality_filter(
    records: &[RevisionRecord],
    policy: &FilterPolicy,
) -> (Vec<RevisionRecord>, QualityReport) {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in records {
        let c = counts.entry(&r.model).or_default();
        c.0 += 1;
        c.1 += usize::from(r.source_method == SourceMethod::Fallback);
    }
    let contamination: BTreeMap<String, f64> = counts
        .iter()
        .map(|(m, (n, f))| (m.to_string(), *f as f64 / *n as f64))
        .collect();
    let excluded: Vec<String> = contamination
        .iter()
        .filter(|(_, rate)| **rate > policy.fallback_rate_threshold)
        .map(|(m, _)| m.clone())
        .collect();
    for m in &excluded {
        log::warn!(
            "excluding model {m}: fallback rate {:.3} exceeds {}",
            contamination[m],
            policy.fallback_rate_threshold
        );
    }

    let kept: Vec<RevisionRecord> = records
        .iter()
        .filter(|r| r.source_method == SourceMethod::Llm && !excluded.contains(&r.model))
        .cloned()
        .collect();
    let total = records.len();
    let fallbacks: usize = counts.values().map(|c| c.1).sum();
    let report = QualityReport {
        total,
        kept: kept.len(),
        fallback_rate: if total > 0 {
            fallbacks as f64 / total as f64
        } else {
            0.0
        },
        invalid_rate: 0.0,
        per_model_contamination: contamination,
        excluded_models: excluded,
    };
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{synthesize_records, SynthConfig};

    fn with_fallbacks(model: &str, n: usize, fallbacks: usize) -> Vec<RevisionRecord> {
        let mut recs = synthesize_records(&SynthConfig::new(n, 4, 1.0)).unwrap();
        for (i, r) in recs.iter_mut().enumerate() {
            r.model = model.into();
            if i < fallbacks {
                r.source_method = SourceMethod::Fallback;
            }
        }
        recs
    }

    #[test]
    fn all_llm_is_untouched() {
        let recs = with_fallbacks("a", 20, 0);
        let (kept, report) = quality_filter(&recs, &FilterPolicy::default());
        assert_eq!(kept.len(), 20);
        assert_eq!(report.per_model_contamination["a"], 0.0);
    }

    #[test]
    fn heavy_contamination_excludes_model() {
        let mut recs = with_fallbacks("gemini", 1000, 687);
        recs.extend(with_fallbacks("gpt", 100, 7));
        let (kept, report) = quality_filter(&recs, &FilterPolicy::default());
        assert_eq!(report.excluded_models, vec!["gemini".to_string()]);
        assert!(kept.iter().all(|r| r.model == "gpt"));
        assert_eq!(kept.len(), 93);
        assert!((report.per_model_contamination["gemini"] - 0.687).abs() < 1e-12);
        assert!((report.per_model_contamination["gpt"] - 0.07).abs() < 1e-12);
    }

    #[test]
    fn idempotent_and_never_grows() {
        let mut recs = with_fallbacks("a", 50, 5);
        recs.extend(with_fallbacks("b", 50, 30));
        let policy = FilterPolicy::default();
        let (once, _) = quality_filter(&recs, &policy);
        let (twice, _) = quality_filter(&once, &policy);
        assert!(once.len() <= recs.len());
        assert_eq!(once, twice);
    }

    #[test]
    fn invalid_lines_fold_into_rates() {
        let recs = with_fallbacks("a", 8, 2);
        let (_, mut report) = quality_filter(&recs, &FilterPolicy::default());
        report.count_invalid(2);
        assert_eq!(report.total, 10);
        assert!((report.invalid_rate - 0.2).abs() < 1e-15);
        assert!((report.fallback_rate - 0.2).abs() < 1e-15);
    }
}
