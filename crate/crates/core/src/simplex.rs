//! Probability-simplex arithmetic in linear and log space.
//!
//! Every [`BeliefDist`] carries a strictly positive floor ([`FLOOR`]) so that
//! logarithms are always finite. Divergences are reported in nats.

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest probability stored in a distribution; applied before any log.
pub const FLOOR: f64 = 1e-9;

/// Allowed deviation of a distribution's sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// L-infinity tolerance for treating two distributions as equal.
pub const EQ_TOLERANCE: f64 = 1e-8;

/// A non-negative information quantity in natural-log units.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Nats(f64);

impl Nats {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Nats> for f64 {
    fn from(n: Nats) -> f64 {
        n.0
    }
}

/// A point on the K-1 simplex with every entry at least [`FLOOR`]
/// (up to the renormalization that follows clamping).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct BeliefDist {
    probs: Vec<f64>,
}

impl BeliefDist {
    /// Builds a distribution from probabilities that already sum to 1
    /// within [`SUM_TOLERANCE`]. Entries below the floor are clamped.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Self {
            probs: apply_floor(probs),
        })
    }

    /// Like [`BeliefDist::new`] but accepts any sum within `tol` of 1 and
    /// rescales to an exact distribution.
    pub fn with_sum_tolerance(probs: Vec<f64>, tol: f64) -> Result<Self> {
        validate_entries(&probs)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, outside 1 ± {tol}"
            )));
        }
        let probs = if sum == 1.0 {
            probs
        } else {
            probs.into_iter().map(|p| p / sum).collect()
        };
        Ok(Self {
            probs: apply_floor(probs),
        })
    }

    /// Normalizes non-negative weights of any positive total.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        validate_entries(weights)?;
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidInput("weights sum to zero".into()));
        }
        Ok(Self {
            probs: apply_floor(weights.iter().map(|w| w / sum).collect()),
        })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("need k >= 2, got {k}")));
        }
        Ok(Self {
            probs: vec![1.0 / k as f64; k],
        })
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn log_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.ln()).collect()
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::MAX, f64::min)
    }

    pub fn linf_distance(&self, other: &BeliefDist) -> Result<f64> {
        check_dims(self, other)?;
        Ok(self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Equality within [`EQ_TOLERANCE`]; distributions of different
    /// dimension are never equal.
    pub fn approx_eq(&self, other: &BeliefDist) -> bool {
        self.linf_distance(other)
            .map(|d| d < EQ_TOLERANCE)
            .unwrap_or(false)
    }
}

fn validate_entries(probs: &[f64]) -> Result<()> {
    if probs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 entries, got {}",
            probs.len()
        )));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidInput(format!("entry {i} is not finite")));
        }
        if p < 0.0 {
            return Err(Error::InvalidInput(format!("entry {i} is negative ({p})")));
        }
    }
    Ok(())
}

fn apply_floor(mut probs: Vec<f64>) -> Vec<f64> {
    if probs.iter().all(|&p| p >= FLOOR) {
        return probs;
    }
    for p in probs.iter_mut() {
        *p = p.max(FLOOR);
    }
    let sum: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= sum;
    }
    probs
}

fn check_dims(p: &BeliefDist, q: &BeliefDist) -> Result<()> {
    if p.k() != q.k() {
        return Err(Error::Dimension {
            expected: p.k(),
            got: q.k(),
        });
    }
    Ok(())
}

/// `log Σ exp(w_i)` with max subtraction.
pub fn logsumexp(log_weights: &[f64]) -> f64 {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + log_weights
        .iter()
        .map(|w| (w - max).exp())
        .sum::<f64>()
        .ln()
}

/// Softmax of log-weights, floored.
pub fn normalize_log(log_weights: &[f64]) -> Result<BeliefDist> {
    if log_weights.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 log-weights, got {}",
            log_weights.len()
        )));
    }
    if let Some(i) = log_weights.iter().position(|w| !w.is_finite()) {
        return Err(Error::InvalidInput(format!("log-weight {i} is not finite")));
    }
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(BeliefDist {
        probs: apply_floor(exps.into_iter().map(|e| e / sum).collect()),
    })
}

/// `D_KL(p ‖ q) = Σ p(i) ln(p(i)/q(i))`.
pub fn kl_divergence(p: &BeliefDist, q: &BeliefDist) -> Result<Nats> {
    check_dims(p, q)?;
    let kl: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum();
    Ok(Nats(kl.max(0.0)))
}

/// Hilbert projective metric `max_i ln(p/q) - min_i ln(p/q)`.
pub fn hilbert_metric(p: &BeliefDist, q: &BeliefDist) -> Result<Nats> {
    check_dims(p, q)?;
    Ok(Nats(hilbert_metric_log(&p.log_probs(), &q.log_probs())))
}

/// Hilbert metric between two points given as (possibly unnormalized)
/// log-weights. Additive constants on either side cancel.
pub fn hilbert_metric_log(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (lo, hi) = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
    (hi - lo).max(0.0)
}

/// Shannon entropy in nats.
pub fn entropy(p: &BeliefDist) -> Nats {
    Nats(
        -p.probs
            .iter()
            .map(|&pi| if pi > 0.0 { pi * pi.ln() } else { 0.0 })
            .sum::<f64>(),
    )
}

/// `D_KL(p ‖ r)` for `p ∝ r · exp(delta)`, accurate even when `delta` is
/// nearly constant and the divergence is far below machine epsilon.
///
/// For small spreads the divergence is expanded in the cumulants of
/// `delta` under `r` (it is the Bregman divergence of the log-partition
/// function), which avoids the cancellation of the direct formula.
pub fn kl_from_log_ratio(reference: &[f64], delta: &[f64]) -> f64 {
    debug_assert_eq!(reference.len(), delta.len());
    let mean: f64 = reference.iter().zip(delta).map(|(r, d)| r * d).sum();
    let spread = delta.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
    if spread < 1e-3 {
        let mut m = [0.0f64; 6];
        for (r, d) in reference.iter().zip(delta) {
            let c = d - mean;
            let mut pow = c * c;
            for slot in m.iter_mut().skip(2) {
                *slot += r * pow;
                pow *= c;
            }
        }
        let k2 = m[2];
        let k3 = m[3];
        let k4 = m[4] - 3.0 * m[2] * m[2];
        let k5 = m[5] - 10.0 * m[3] * m[2];
        return (k2 / 2.0 + k3 / 3.0 + k4 / 8.0 + k5 / 30.0).max(0.0);
    }
    let max = delta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pivot = (0..reference.len())
        .max_by(|&i, &j| reference[i].total_cmp(&reference[j]))
        .expect("non-empty reference");
    if max - delta[pivot] < 30.0 {
        // Measured from the dominant reference entry, both terms scale with
        // the mass off that entry and the difference keeps its precision
        // when the reference sits near a vertex.
        let total: f64 = reference.iter().sum();
        let d: Vec<f64> = delta.iter().map(|x| x - delta[pivot]).collect();
        let s: f64 = reference
            .iter()
            .zip(&d)
            .map(|(r, di)| r / total * di.exp_m1())
            .sum();
        let expected: f64 = reference
            .iter()
            .zip(&d)
            .map(|(r, di)| r / total * di.exp() * di)
            .sum::<f64>()
            / (1.0 + s);
        return (expected - s.ln_1p()).max(0.0);
    }
    let weights: Vec<f64> = reference
        .iter()
        .zip(delta)
        .map(|(r, d)| r * (d - max).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let expected: f64 = weights
        .iter()
        .zip(delta)
        .map(|(w, d)| w / z * (d - max))
        .sum();
    (expected - z.ln()).max(0.0)
}
