use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::Serialize;

use super::{fmt_float, guarded_ln};
use crate::error::{Error, Result};
use crate::records::RevisionRecord;

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOLERANCE: f64 = 1e-12;

/// Fit of `log q1 = α_q0·log q0 + α_b·log b + c` with per-record intercepts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoParamFit {
    pub alpha_q0: f64,
    pub alpha_b: f64,
    pub intercept: f64,
    /// `α_b / α_q0`; NaN when `α_q0 = 0`.
    pub trust_ratio: f64,
    /// Ratio of extreme singular values of the design `[1, log q0, log b]`
    /// with columns scaled to unit length; infinite when rank-deficient.
    pub condition_number: f64,
    pub r_squared: f64,
    /// R² gain over the single-exponent fit on the same points.
    pub delta_r_squared_vs_unified: f64,
    pub unified_alpha: f64,
    pub n_points: usize,
    pub n_records: usize,
    /// False when the within-record design is singular and the coefficients
    /// are a minimum-norm solution.
    pub reliable: bool,
}

impl TwoParamFit {
    pub const CSV_HEADER: [&'static str; 12] = [
        "alpha_q0",
        "alpha_b",
        "intercept",
        "trust_ratio",
        "condition_number",
        "r_squared",
        "delta_r_squared_vs_unified",
        "unified_alpha",
        "n_points",
        "n_records",
        "reliable",
        "intercepts",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            fmt_float(self.alpha_q0),
            fmt_float(self.alpha_b),
            fmt_float(self.intercept),
            fmt_float(self.trust_ratio),
            fmt_float(self.condition_number),
            fmt_float(self.r_squared),
            fmt_float(self.delta_r_squared_vs_unified),
            fmt_float(self.unified_alpha),
            self.n_points.to_string(),
            self.n_records.to_string(),
            self.reliable.to_string(),
            "per_record".into(),
        ]
    }
}

/// Scaled condition number of `[1, u, v]`: each column is divided by its
/// Euclidean norm before the singular values are taken.
fn scaled_condition_number(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len();
    let norm = |c: &[f64]| c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return f64::INFINITY;
    }
    let ones = 1.0 / (n as f64).sqrt();
    let design = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => ones,
        1 => u[i] / nu,
        _ => v[i] / nv,
    });
    let sv = design.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 1e-15 * max {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Two-exponent fit with an identifiability diagnostic. A singular design
/// is reported through `condition_number` and `reliable`, not as an error.
pub fn fit_two_param(records: &[RevisionRecord]) -> Result<TwoParamFit> {
    if records.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: records.len(),
        });
    }
    let mut lq_all = Vec::new();
    let mut lb_all = Vec::new();
    let (mut suu, mut suv, mut svv, mut suy, mut svy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut centers = Vec::with_capacity(records.len());
    for r in records {
        let lq: Vec<f64> = r.q0.probs().iter().map(|p| guarded_ln(*p)).collect();
        let lb: Vec<f64> = r.evidence.probs().iter().map(|p| guarded_ln(*p)).collect();
        let y: Vec<f64> = r.q1.probs().iter().map(|p| guarded_ln(*p)).collect();
        let k = lq.len() as f64;
        let (mu, mv, my) = (
            lq.iter().sum::<f64>() / k,
            lb.iter().sum::<f64>() / k,
            y.iter().sum::<f64>() / k,
        );
        for i in 0..lq.len() {
            let (du, dv, dy) = (lq[i] - mu, lb[i] - mv, y[i] - my);
            suu += du * du;
            suv += du * dv;
            svv += dv * dv;
            suy += du * dy;
            svy += dv * dy;
            syy += dy * dy;
        }
        centers.push((mu, mv, my));
        lq_all.extend(lq);
        lb_all.extend(lb);
    }
    let n_points = lq_all.len();
    if suu + svv <= 1e-24 * n_points as f64 {
        return Err(Error::DegenerateDesign);
    }

    let gram = Matrix2::new(suu, suv, suv, svv);
    let rhs = Vector2::new(suy, svy);
    let svd = gram.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let reliable = smin > RANK_TOLERANCE * smax;
    let coef = svd
        .solve(&rhs, RANK_TOLERANCE * smax)
        .map_err(|_| Error::DegenerateDesign)?;
    let (a, b) = (coef[0], coef[1]);

    let ss_res =
        (syy - 2.0 * (a * suy + b * svy) + a * a * suu + 2.0 * a * b * suv + b * b * svv).max(0.0);
    let r2 = |res: f64| {
        if syy > 0.0 {
            (1.0 - res / syy).clamp(0.0, 1.0)
        } else {
            1.0
        }
    };
    let sxx = suu + 2.0 * suv + svv;
    let sxy = suy + svy;
    let unified_alpha = sxy / sxx;
    let ss_res_unified =
        (syy - 2.0 * unified_alpha * sxy + unified_alpha * unified_alpha * sxx).max(0.0);
    let r_squared = r2(ss_res);
    let unified_r2 = r2(ss_res_unified);

    let intercept = centers
        .iter()
        .map(|(mu, mv, my)| my - a * mu - b * mv)
        .sum::<f64>()
        / centers.len() as f64;

    Ok(TwoParamFit {
        alpha_q0: a,
        alpha_b: b,
        intercept,
        trust_ratio: if a != 0.0 { b / a } else { f64::NAN },
        condition_number: scaled_condition_number(&lq_all, &lb_all),
        r_squared,
        delta_r_squared_vs_unified: (r_squared - unified_r2).max(0.0),
        unified_alpha,
        n_points,
        n_records: records.len(),
        reliable,
    })
}
