use serde::Serialize;

use super::{Reference, Trajectory};
use crate::error::{Error, Result};

/// Distances below this are not resolved when forming step ratios.
const RESOLUTION: f64 = 1e-12;

/// Allowed deviation of a Hilbert step ratio from the step's exponent.
pub const HILBERT_RATIO_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub reference: &'static str,
    /// `d_H(q_{t+1}, ref) / d_H(q_t, ref)`; `None` where either side is
    /// below resolution.
    pub hilbert_ratios: Vec<Option<f64>>,
    /// Largest `|ratio − α_t|` over resolved steps.
    pub max_ratio_error: f64,
    pub hilbert_exact: bool,
    /// `Π_{s<t} α_s²` for `t = 0..=T`.
    pub cumulative_product_sq: Vec<f64>,
    /// Whether `D_KL(q_t‖ref) <= Π_{s<t} α_s² · D_KL(q_0‖ref)` at every step.
    pub kl_bounded: bool,
    pub kl_bound_violations: Vec<usize>,
    /// `D_KL(q_{t+1}‖ref) / D_KL(q_t‖ref)` where resolvable.
    pub kl_step_ratios: Vec<Option<f64>>,
    pub geometric_mean: f64,
}

/// Checks exact Hilbert contraction and the KL product bound along a
/// simulated trajectory.
pub fn contraction_certificate(traj: &Trajectory) -> Result<CertificateReport> {
    let d0 = traj.hilbert_to_fixed[0];
    if d0 <= RESOLUTION {
        return Err(Error::NotApplicable(
            "trajectory starts at its reference; nothing contracts".into(),
        ));
    }
    let steps = traj.steps();
    let mut ratios = Vec::with_capacity(steps);
    let mut max_err: f64 = 0.0;
    for t in 0..steps {
        let (a, b) = (traj.hilbert_to_fixed[t], traj.hilbert_to_fixed[t + 1]);
        if a > RESOLUTION && b > RESOLUTION {
            let r = b / a;
            max_err = max_err.max((r - traj.schedule.alpha_at(t)).abs());
            ratios.push(Some(r));
        } else {
            ratios.push(None);
        }
    }

    let mut product = Vec::with_capacity(steps + 1);
    product.push(1.0);
    for t in 0..steps {
        let a = traj.schedule.alpha_at(t);
        product.push(product[t] * a * a);
    }

    let kl0 = traj.kl_to_fixed[0];
    let violations: Vec<usize> = (0..=steps)
        .filter(|&t| traj.kl_to_fixed[t] > product[t] * kl0 * (1.0 + 1e-12))
        .collect();

    let kl_ratios = traj
        .kl_to_fixed
        .windows(2)
        .map(|w| (w[0] > 0.0 && w[1] > 0.0).then(|| w[1] / w[0]))
        .collect();

    let geometric_mean = if traj.schedule.is_constant() {
        traj.schedule.alpha_at(0)
    } else {
        traj.schedule.geometric_mean()
    };

    Ok(CertificateReport {
        reference: match traj.reference {
            Reference::FixedPoint(_) => "fixed_point",
            Reference::Companion { .. } => "companion",
        },
        hilbert_ratios: ratios,
        max_ratio_error: max_err,
        hilbert_exact: max_err <= HILBERT_RATIO_TOL,
        cumulative_product_sq: product,
        kl_bounded: violations.is_empty(),
        kl_bound_violations: violations,
        kl_step_ratios: kl_ratios,
        geometric_mean,
    })
}
