use std::sync::LazyLock;

use alphalaw::records::SourceMethod;
use alphalaw::simplex::BeliefDist;
use regex::Regex;

/// Sums inside this band are rescaled to 1; anything else falls back.
pub const SUM_BAND: (f64, f64) = (0.9, 1.1);

static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?").expect("valid regex")
});

#[derive(Debug, Clone, PartialEq)]
pub struct ElicitationResult {
    pub probs: BeliefDist,
    pub source_method: SourceMethod,
    pub raw_text: String,
}

fn strict(text: &str, k: usize) -> Option<Vec<f64>> {
    let v: Vec<f64> = serde_json::from_str(text.trim()).ok()?;
    (v.len() == k).then_some(v)
}

fn lenient(text: &str, k: usize) -> Option<Vec<f64>> {
    let v: Vec<f64> = NUMBER
        .find_iter(text)
        .filter_map(|m| m.as_str().parse().ok())
        .take(k)
        .collect();
    (v.len() == k).then_some(v)
}

fn accept(v: &[f64]) -> Option<BeliefDist> {
    if v.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return None;
    }
    let sum: f64 = v.iter().sum();
    if !(SUM_BAND.0..=SUM_BAND.1).contains(&sum) {
        return None;
    }
    BeliefDist::with_sum_tolerance(v.to_vec(), SUM_BAND.1 - 1.0).ok()
}

/// Reads `k` probabilities from a model reply.
///
/// The reply is first parsed as a JSON array of exactly `k` numbers. If that
/// fails, the first `k` numbers appearing anywhere in the text are taken in
/// order. Values summing to within [`SUM_BAND`] are rescaled to sum to 1.
/// Anything else yields the uniform distribution flagged as a fallback.
pub fn parse_probability_response(text: &str, k: usize) -> ElicitationResult {
    let parsed = strict(text, k)
        .and_then(|v| accept(&v))
        .or_else(|| lenient(text, k).and_then(|v| accept(&v)));
    let (probs, source_method) = match parsed {
        Some(p) => (p, SourceMethod::Llm),
        None => (uniform(k), SourceMethod::Fallback),
    };
    ElicitationResult {
        probs,
        source_method,
        raw_text: text.to_string(),
    }
}

/// The fallback distribution.
pub fn uniform(k: usize) -> BeliefDist {
    BeliefDist::uniform(k.max(2)).expect("K >= 2")
}
