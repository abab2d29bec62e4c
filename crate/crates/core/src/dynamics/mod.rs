//! The tempered multiplicative update `q' ∝ (q · b)^α`, its fixed points,
//! stability regimes and iterated trajectories.

mod certificate;
mod trajectory;
mod twofold;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evidence::EvidenceDist;
use crate::simplex::{entropy, kl_divergence, normalize_log, BeliefDist};

pub use certificate::{contraction_certificate, CertificateReport};
pub use trajectory::{simulate_trajectory, Reference, Trajectory};

/// Half-width of the band around α = 1 classified as Bayesian.
pub const BAYES_TOL: f64 = 1e-9;

/// Minimum distance from 1 for which a fixed point is computed.
pub const MARGINAL_TOL: f64 = 1e-6;

/// Per-step revision exponents. A single entry means a constant exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSchedule {
    alphas: Vec<f64>,
}

impl AlphaSchedule {
    pub fn constant(alpha: f64) -> Result<Self> {
        Self::per_step(vec![alpha])
    }

    pub fn per_step(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidParameter("empty alpha schedule".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive and finite, got {a}"
            )));
        }
        Ok(Self { alphas })
    }

    pub fn is_constant(&self) -> bool {
        self.alphas.len() == 1
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Exponent applied on step `t` (0-based).
    pub fn alpha_at(&self, t: usize) -> f64 {
        if self.is_constant() {
            self.alphas[0]
        } else {
            self.alphas[t]
        }
    }

    /// Regularization strength λ with α = 1/(1+λ).
    pub fn lambda_at(&self, t: usize) -> f64 {
        1.0 / self.alpha_at(t) - 1.0
    }

    pub fn geometric_mean(&self) -> f64 {
        let mean_log = self.alphas.iter().map(|a| a.ln()).sum::<f64>() / self.alphas.len() as f64;
        mean_log.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeLabel {
    Contractive,
    Bayesian,
    Expansive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regime {
    pub label: RegimeLabel,
    pub alpha: f64,
}

pub fn classify_regime(alpha: f64) -> Regime {
    debug_assert!(alpha.is_finite() && alpha > 0.0);
    let label = if alpha < 1.0 - BAYES_TOL {
        RegimeLabel::Contractive
    } else if alpha > 1.0 + BAYES_TOL {
        RegimeLabel::Expansive
    } else {
        RegimeLabel::Bayesian
    };
    Regime { label, alpha }
}

fn check_exponent(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite and non-negative, got {value}"
        )));
    }
    Ok(())
}

fn check_same_k(q: &BeliefDist, b: &EvidenceDist) -> Result<()> {
    if q.k() != b.k() {
        return Err(Error::Dimension {
            expected: q.k(),
            got: b.k(),
        });
    }
    Ok(())
}

/// One revision step `log q'(i) = α [log q(i) + log b(i)] + c`.
///
/// α = 1 is the exact Bayes posterior; α = 0 returns the uniform
/// distribution.
pub fn alpha_update(q: &BeliefDist, b: &EvidenceDist, alpha: f64) -> Result<BeliefDist> {
    check_exponent("alpha", alpha)?;
    two_param_update(q, b, alpha, alpha)
}

/// Update with separate exponents on prior and evidence.
pub fn two_param_update(
    q: &BeliefDist,
    b: &EvidenceDist,
    alpha_q0: f64,
    alpha_b: f64,
) -> Result<BeliefDist> {
    check_exponent("alpha_q0", alpha_q0)?;
    check_exponent("alpha_b", alpha_b)?;
    check_same_k(q, b)?;
    let weights: Vec<f64> = q
        .probs()
        .iter()
        .zip(b.probs())
        .map(|(qi, bi)| alpha_q0 * qi.ln() + alpha_b * bi.ln())
        .collect();
    normalize_log(&weights)
}

/// Fixed point of the update for fixed evidence: `q* ∝ b^(α/(1-α))`.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPoint {
    pub q_star: BeliefDist,
    /// Normalized log-probabilities of `q*` without the floor.
    pub log_q_star: Vec<f64>,
    /// Log-normalization constant at the fixed point.
    pub c_star: f64,
    pub alpha: f64,
    /// L-infinity change of `q*` under one more update.
    pub residual: f64,
}

pub fn fixed_point(b: &EvidenceDist, alpha: f64) -> Result<FixedPoint> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    if (alpha - 1.0).abs() <= MARGINAL_TOL {
        return Err(Error::MarginalStability { alpha });
    }
    let exponent = alpha / (1.0 - alpha);
    let log_b = b.dist().log_probs();
    let weights: Vec<f64> = log_b.iter().map(|l| exponent * l).collect();
    let lse = crate::simplex::logsumexp(&weights);
    let log_q_star: Vec<f64> = weights.iter().map(|w| w - lse).collect();
    let q_star = normalize_log(&weights)?;
    let c_star = log_q_star
        .iter()
        .zip(&log_b)
        .map(|(l, beta)| (1.0 - alpha) * l - alpha * beta)
        .sum::<f64>()
        / log_b.len() as f64;
    let residual = alpha_update(&q_star, b, alpha)?.linf_distance(&q_star)?;
    Ok(FixedPoint {
        q_star,
        log_q_star,
        c_star,
        alpha,
        residual,
    })
}

/// `J[q] = α·D_KL(q ‖ q_prev) − E_q[log b]`.
///
/// Its minimizer over the simplex is `q_prev · b^(1/α)`, which agrees with
/// [`alpha_update`] only at α = 1. [`tempered_free_energy`] is the objective
/// whose minimizer is the α-update for every α.
pub fn variational_objective(
    q: &BeliefDist,
    q_prev: &BeliefDist,
    b: &EvidenceDist,
    alpha: f64,
) -> Result<f64> {
    check_same_k(q, b)?;
    let kl = kl_divergence(q, q_prev)?.value();
    Ok(alpha * kl - expected_log(q, b))
}

/// `F[q] = (1/α)·Σ q ln q − E_q[ln q_prev + ln b]`, minimized exactly by
/// `alpha_update(q_prev, b, α)`.
pub fn tempered_free_energy(
    q: &BeliefDist,
    q_prev: &BeliefDist,
    b: &EvidenceDist,
    alpha: f64,
) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    check_same_k(q, b)?;
    if q.k() != q_prev.k() {
        return Err(Error::Dimension {
            expected: q.k(),
            got: q_prev.k(),
        });
    }
    let cross: f64 = q
        .probs()
        .iter()
        .zip(q_prev.probs())
        .map(|(qi, pi)| qi * pi.ln())
        .sum();
    Ok(-entropy(q).value() / alpha - cross - expected_log(q, b))
}

fn expected_log(q: &BeliefDist, b: &EvidenceDist) -> f64 {
    q.probs()
        .iter()
        .zip(b.probs())
        .map(|(qi, bi)| qi * bi.ln())
        .sum()
}

/// Log-odds `r_t = log q_t(0) − log q_t(1)` of a two-candidate chain started
/// from the uniform distribution, for α ≥ 1.
///
/// The series follows `r_{t+1} = α r_t + α log(b(0)/b(1))` and diverges for
/// α > 1 whenever the evidence is not symmetric.
pub fn log_odds_instability_demo(b: &EvidenceDist, alpha: f64, steps: usize) -> Result<Vec<f64>> {
    if b.k() != 2 {
        return Err(Error::InvalidParameter(format!(
            "log-odds demo needs K = 2, got {}",
            b.k()
        )));
    }
    if !alpha.is_finite() || alpha < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "log-odds demo needs alpha >= 1, got {alpha}"
        )));
    }
    let beta = b.dist().log_probs();
    let mut w = [twofold::Twofold::ZERO; 2];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(0.0);
    for _ in 0..steps {
        for (wi, bi) in w.iter_mut().zip(&beta) {
            *wi = (*wi + twofold::Twofold::from_f64(*bi)) * alpha;
        }
        out.push((w[0] - w[1]).to_f64());
    }
    Ok(out)
}
