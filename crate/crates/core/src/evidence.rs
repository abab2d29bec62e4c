//! Verifier evidence: the bimodal encoding with strength `s` and flip noise.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simplex::BeliefDist;

/// Strength used when none is given.
pub const DEFAULT_STRENGTH: f64 = 0.9;

/// Strength levels swept by the encoding-sensitivity analysis.
pub const DEFAULT_STRENGTH_GRID: [f64; 6] = [0.51, 0.60, 0.70, 0.80, 0.90, 0.99];

/// An evidence distribution `b`. When built by [`encode_evidence`],
/// `correct_index` holds the concentrated mass `s` and every other entry is
/// `(1-s)/(K-1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceDist {
    dist: BeliefDist,
    correct_index: Option<usize>,
    strength: Option<f64>,
}

impl EvidenceDist {
    /// Evidence of arbitrary shape with no known generating parameters.
    pub fn from_dist(dist: BeliefDist) -> Self {
        Self {
            dist,
            correct_index: None,
            strength: None,
        }
    }

    /// Evidence with recorded generating parameters, e.g. read back from a
    /// record file.
    pub fn with_parameters(
        dist: BeliefDist,
        correct_index: Option<usize>,
        strength: Option<f64>,
    ) -> Result<Self> {
        if let Some(c) = correct_index {
            if c >= dist.k() {
                return Err(Error::InvalidInput(format!(
                    "correct index {c} out of range for K = {}",
                    dist.k()
                )));
            }
        }
        Ok(Self {
            dist,
            correct_index,
            strength,
        })
    }

    pub fn dist(&self) -> &BeliefDist {
        &self.dist
    }

    pub fn probs(&self) -> &[f64] {
        self.dist.probs()
    }

    pub fn k(&self) -> usize {
        self.dist.k()
    }

    pub fn correct_index(&self) -> Option<usize> {
        self.correct_index
    }

    pub fn strength(&self) -> Option<f64> {
        self.strength
    }
}

fn check_strength(k: usize, s: f64) -> Result<()> {
    let lower = 1.0 / k as f64;
    if !(s > lower && s < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "strength {s} must lie in (1/K, 1) = ({lower}, 1)"
        )));
    }
    Ok(())
}

/// Puts mass `s` on `correct_index` and spreads `1-s` evenly over the rest.
pub fn encode_evidence(k: usize, correct_index: usize, s: f64) -> Result<EvidenceDist> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need K >= 2, got {k}")));
    }
    if correct_index >= k {
        return Err(Error::InvalidInput(format!(
            "correct index {correct_index} out of range for K = {k}"
        )));
    }
    check_strength(k, s)?;
    let rest = (1.0 - s) / (k - 1) as f64;
    let probs: Vec<f64> = (0..k)
        .map(|i| if i == correct_index { s } else { rest })
        .collect();
    Ok(EvidenceDist {
        dist: BeliefDist::with_sum_tolerance(probs, 1e-9)?,
        correct_index: Some(correct_index),
        strength: Some(s),
    })
}

/// With probability `p_flip`, moves the concentrated mass to a uniformly
/// chosen wrong index; otherwise returns `b` unchanged.
///
/// Always consumes one uniform draw, plus one index draw when flipping, so
/// two calls seeded alike flip the same records at nested rates.
pub fn inject_flip_noise<R: Rng + ?Sized>(
    b: &EvidenceDist,
    p_flip: f64,
    rng: &mut R,
) -> Result<EvidenceDist> {
    if !(0.0..=1.0).contains(&p_flip) {
        return Err(Error::InvalidParameter(format!(
            "p_flip must lie in [0, 1], got {p_flip}"
        )));
    }
    let correct = b
        .correct_index
        .ok_or_else(|| Error::NotApplicable("evidence has no concentrated index to flip".into()))?;
    let k = b.k();
    let s = b.strength.unwrap_or(b.probs()[correct]);
    let u: f64 = rng.random();
    if u >= p_flip {
        return Ok(b.clone());
    }
    let mut j = rng.random_range(0..k - 1);
    if j >= correct {
        j += 1;
    }
    encode_evidence(k, j, s)
}

/// Validates strength levels against the smallest candidate count in use.
pub fn strength_grid(levels: &[f64], k_min: usize) -> Result<Vec<f64>> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("empty strength grid".into()));
    }
    for &s in levels {
        check_strength(k_min, s)?;
    }
    Ok(levels.to_vec())
}
