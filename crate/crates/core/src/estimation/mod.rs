//! Log-space regression of posteriors on prior-plus-evidence.
//!
//! For every candidate `i` of a record the model is
//! `log q1(i) = α·(log q0(i) + log b(i)) + c`, where `c` is the record's
//! log-normalizer. Pooled fits give each record its own intercept (a
//! within-record estimator) because `c` differs between records; the
//! single-intercept variant is kept for comparison.

pub(crate) mod bootstrap;
mod two_param;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::records::RevisionRecord;
pub(crate) use crate::report::{fmt_float, fmt_opt};
use crate::simplex::FLOOR;

pub use bootstrap::{
    bootstrap_ci, bootstrap_estimates, bootstrap_pooled_alpha, fit_alpha_pooled_with_ci,
    DEFAULT_RESAMPLES, MIN_BOOTSTRAP_RECORDS,
};
pub use two_param::{fit_two_param, TwoParamFit};

/// Per-problem fits below this R² are dropped from downstream analyses.
pub const DEFAULT_R2_THRESHOLD: f64 = 0.3;

/// One candidate's `(x, y)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionPoint {
    /// `log q0(i) + log b(i)`
    pub x: f64,
    /// `log q1(i)`
    pub y: f64,
    pub record_id: String,
    pub candidate_index: usize,
}

pub(crate) fn guarded_ln(p: f64) -> f64 {
    p.max(FLOOR).ln()
}

pub fn build_regression_points(record: &RevisionRecord) -> Vec<RegressionPoint> {
    record
        .q0
        .probs()
        .iter()
        .zip(record.evidence.probs())
        .zip(record.q1.probs())
        .enumerate()
        .map(|(i, ((q0, b), q1))| RegressionPoint {
            x: guarded_ln(*q0) + guarded_ln(*b),
            y: guarded_ln(*q1),
            record_id: record.problem_id.clone(),
            candidate_index: i,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    PooledOls,
    PerProblem,
}

impl FitMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FitMethod::PooledOls => "pooled_ols",
            FitMethod::PerProblem => "per_problem",
        }
    }
}

/// How intercepts enter a pooled fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InterceptMode {
    /// One intercept per record; the reported intercept is their mean.
    PerRecord,
    /// A single intercept shared by all points.
    Common,
}

impl InterceptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InterceptMode::PerRecord => "per_record",
            InterceptMode::Common => "common",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub alpha: f64,
    pub intercept: f64,
    /// Share of the (within-record, for per-record intercepts) variation of
    /// `y` explained by the fit.
    pub r_squared: f64,
    pub n_points: usize,
    pub n_records: usize,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub method: FitMethod,
    pub intercepts: InterceptMode,
}

impl FitResult {
    pub const CSV_HEADER: [&'static str; 9] = [
        "method",
        "intercepts",
        "alpha",
        "intercept",
        "r_squared",
        "n_points",
        "n_records",
        "ci_low",
        "ci_high",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.method.as_str().into(),
            self.intercepts.as_str().into(),
            fmt_float(self.alpha),
            fmt_float(self.intercept),
            fmt_float(self.r_squared),
            self.n_points.to_string(),
            self.n_records.to_string(),
            fmt_opt(self.ci_low),
            fmt_opt(self.ci_high),
        ]
    }
}

/// Centered second moments of one record's points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Moments {
    pub n: usize,
    pub mx: f64,
    pub my: f64,
    pub sxx: f64,
    pub sxy: f64,
    pub syy: f64,
}

impl Moments {
    pub fn from_xy(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mx = x.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            let (dx, dy) = (a - mx, b - my);
            sxx += dx * dx;
            sxy += dx * dy;
            syy += dy * dy;
        }
        Self {
            n,
            mx,
            my,
            sxx,
            sxy,
            syy,
        }
    }

    pub fn from_parts(q0: &[f64], b: &[f64], q1: &[f64]) -> Self {
        let x: Vec<f64> = q0
            .iter()
            .zip(b)
            .map(|(q, e)| guarded_ln(*q) + guarded_ln(*e))
            .collect();
        let y: Vec<f64> = q1.iter().map(|p| guarded_ln(*p)).collect();
        Self::from_xy(&x, &y)
    }

    pub fn of(record: &RevisionRecord) -> Self {
        Self::from_parts(
            record.q0.probs(),
            record.evidence.probs(),
            record.q1.probs(),
        )
    }

    /// Scale of `x` used to judge whether `sxx` is numerically zero.
    fn negligible(sxx: f64, n: usize, mx_sq: f64) -> bool {
        sxx <= 1e-24 * n as f64 * (1.0 + mx_sq)
    }
}

fn r_squared(ss_res: f64, ss_tot: f64) -> f64 {
    if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res <= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Pooled fit from per-record moments.
pub(crate) fn pooled_from_moments(moments: &[Moments], mode: InterceptMode) -> Result<FitResult> {
    if moments.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: moments.len(),
        });
    }
    let n_points: usize = moments.iter().map(|m| m.n).sum();
    match mode {
        InterceptMode::PerRecord => {
            let (mut sxx, mut sxy, mut syy, mut scale) = (0.0, 0.0, 0.0, 0.0);
            for m in moments {
                sxx += m.sxx;
                sxy += m.sxy;
                syy += m.syy;
                scale += m.mx * m.mx * m.n as f64;
            }
            if Moments::negligible(sxx, n_points, scale / n_points as f64) {
                return Err(Error::DegenerateDesign);
            }
            let alpha = sxy / sxx;
            let ss_res: f64 = moments
                .iter()
                .map(|m| (m.syy - 2.0 * alpha * m.sxy + alpha * alpha * m.sxx).max(0.0))
                .sum();
            let intercept =
                moments.iter().map(|m| m.my - alpha * m.mx).sum::<f64>() / moments.len() as f64;
            Ok(FitResult {
                alpha,
                intercept,
                r_squared: r_squared(ss_res, syy),
                n_points,
                n_records: moments.len(),
                ci_low: None,
                ci_high: None,
                method: FitMethod::PooledOls,
                intercepts: mode,
            })
        }
        InterceptMode::Common => {
            let total = n_points as f64;
            let mx = moments.iter().map(|m| m.n as f64 * m.mx).sum::<f64>() / total;
            let my = moments.iter().map(|m| m.n as f64 * m.my).sum::<f64>() / total;
            let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
            for m in moments {
                let (dx, dy, n) = (m.mx - mx, m.my - my, m.n as f64);
                sxx += m.sxx + n * dx * dx;
                sxy += m.sxy + n * dx * dy;
                syy += m.syy + n * dy * dy;
            }
            if Moments::negligible(sxx, n_points, mx * mx) {
                return Err(Error::DegenerateDesign);
            }
            let alpha = sxy / sxx;
            let ss_res = (syy - 2.0 * alpha * sxy + alpha * alpha * sxx).max(0.0);
            Ok(FitResult {
                alpha,
                intercept: my - alpha * mx,
                r_squared: r_squared(ss_res, syy),
                n_points,
                n_records: moments.len(),
                ci_low: None,
                ci_high: None,
                method: FitMethod::PooledOls,
                intercepts: mode,
            })
        }
    }
}

pub(crate) fn moments_of(records: &[RevisionRecord]) -> Vec<Moments> {
    records.iter().map(Moments::of).collect()
}

/// Pooled OLS over all records with one intercept per record.
pub fn fit_alpha_pooled(records: &[RevisionRecord]) -> Result<FitResult> {
    pooled_from_moments(&moments_of(records), InterceptMode::PerRecord)
}

/// Pooled OLS with a single intercept shared by every point.
pub fn fit_alpha_pooled_common(records: &[RevisionRecord]) -> Result<FitResult> {
    pooled_from_moments(&moments_of(records), InterceptMode::Common)
}

pub fn fit_alpha_pooled_with(records: &[RevisionRecord], mode: InterceptMode) -> Result<FitResult> {
    pooled_from_moments(&moments_of(records), mode)
}

/// OLS over a single record's own candidates. Negative or large slopes are
/// returned as they are.
pub fn fit_alpha_per_problem(record: &RevisionRecord) -> Result<FitResult> {
    per_problem_from_moments(&Moments::of(record))
}

pub(crate) fn per_problem_from_moments(m: &Moments) -> Result<FitResult> {
    if m.n < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            got: m.n,
        });
    }
    if Moments::negligible(m.sxx, m.n, m.mx * m.mx) {
        return Err(Error::DegenerateDesign);
    }
    let alpha = m.sxy / m.sxx;
    let ss_res = (m.syy - 2.0 * alpha * m.sxy + alpha * alpha * m.sxx).max(0.0);
    Ok(FitResult {
        alpha,
        intercept: m.my - alpha * m.mx,
        r_squared: r_squared(ss_res, m.syy),
        n_points: m.n,
        n_records: 1,
        ci_low: None,
        ci_high: None,
        method: FitMethod::PerProblem,
        intercepts: InterceptMode::PerRecord,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Marginal,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricMean {
    pub geo_mean: f64,
    /// `Π α_t²`
    pub product_sq: f64,
    pub verdict: Stability,
}

/// `(Π α_t)^(1/T)` with the squared product and whether it contracts.
pub fn geometric_mean_alpha(step_alphas: &[f64]) -> Result<GeometricMean> {
    if step_alphas.is_empty() {
        return Err(Error::InvalidParameter("no step exponents".into()));
    }
    if let Some(a) = step_alphas.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "step exponents must be positive, got {a}"
        )));
    }
    let log_sum: f64 = step_alphas.iter().map(|a| a.ln()).sum();
    let t = step_alphas.len() as f64;
    let verdict = if log_sum.abs() <= 1e-12 * t {
        Stability::Marginal
    } else if log_sum < 0.0 {
        Stability::Stable
    } else {
        Stability::Unstable
    };
    Ok(GeometricMean {
        geo_mean: (log_sum / t).exp(),
        product_sq: (2.0 * log_sum).exp(),
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::{encode_evidence, EvidenceDist};
    use crate::records::{synthesize_records, PriorMode, SourceMethod, SynthConfig};
    use crate::simplex::BeliefDist;
    use approx::assert_abs_diff_eq;

    fn record(q0: &[f64], b: &[f64], q1: &[f64]) -> RevisionRecord {
        RevisionRecord {
            problem_id: "p".into(),
            model: "m".into(),
            dataset: "d".into(),
            q0: BeliefDist::new(q0.to_vec()).unwrap(),
            evidence: EvidenceDist::from_dist(BeliefDist::new(b.to_vec()).unwrap()),
            q1: BeliefDist::new(q1.to_vec()).unwrap(),
            source_method: SourceMethod::Llm,
            step: 1,
            correct_index: None,
            s: None,
            extra: Default::default(),
        }
    }

    #[test]
    fn regression_points_example() {
        let r = record(&[0.5, 0.5], &[0.9, 0.1], &[0.9, 0.1]);
        let pts = build_regression_points(&r);
        assert_eq!(pts.len(), 2);
        assert_abs_diff_eq!(pts[0].x, 0.45f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(pts[0].y, 0.9f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(pts[1].x, 0.05f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(pts[1].y, 0.1f64.ln(), epsilon = 1e-15);

        let flat = record(&[0.25; 4], &[0.25; 4], &[0.25; 4]);
        let pts = build_regression_points(&flat);
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.x == pts[0].x));
    }

    #[test]
    fn exact_recovery_without_noise() {
        for alpha in [0.3, 0.7, 1.0, 1.163, 2.0] {
            for prior in [PriorMode::Uniform, PriorMode::Dirichlet(0.5)] {
                for k in [2, 4, 10] {
                    let cfg = SynthConfig::new(100, k, alpha)
                        .with_prior(prior)
                        .with_seed(11);
                    let recs = synthesize_records(&cfg).unwrap();
                    let fit = fit_alpha_pooled(&recs).unwrap();
                    assert_abs_diff_eq!(fit.alpha, alpha, epsilon = 1e-9);
                    assert!(fit.r_squared > 1.0 - 1e-9);
                    // Each record's intercept is its own log-normalizer.
                    let m = moments_of(&recs);
                    let c_mean =
                        m.iter().map(|m| m.my - alpha * m.mx).sum::<f64>() / m.len() as f64;
                    assert_abs_diff_eq!(fit.intercept, c_mean, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn common_intercept_is_exact_only_with_a_shared_normalizer() {
        // Uniform priors and one evidence pattern per K give every record
        // the same normalizer.
        let cfg = SynthConfig::new(100, 4, 1.163).with_prior(PriorMode::Uniform);
        let recs = synthesize_records(&cfg).unwrap();
        let fit = fit_alpha_pooled_common(&recs).unwrap();
        assert_abs_diff_eq!(fit.alpha, 1.163, epsilon = 1e-9);
        assert_eq!(fit.intercepts, InterceptMode::Common);

        let recs = synthesize_records(&SynthConfig::new(200, 4, 1.163)).unwrap();
        let fit = fit_alpha_pooled_common(&recs).unwrap();
        assert!((fit.alpha - 1.163).abs() > 1e-6);
    }

    #[test]
    fn noisy_recovery() {
        let cfg = SynthConfig::new(2000, 4, 1.0).with_sigma(0.1).with_seed(5);
        let fit = fit_alpha_pooled(&synthesize_records(&cfg).unwrap()).unwrap();
        assert!((0.98..=1.02).contains(&fit.alpha), "alpha {}", fit.alpha);
        assert!(fit.r_squared < 1.0);
    }

    #[test]
    fn degenerate_design() {
        let flat = record(&[0.25; 4], &[0.25; 4], &[0.25; 4]);
        assert!(matches!(
            fit_alpha_pooled(&[flat.clone(), flat.clone()]),
            Err(Error::DegenerateDesign)
        ));
        assert!(matches!(
            fit_alpha_pooled(std::slice::from_ref(&flat)),
            Err(Error::InsufficientData { .. })
        ));
        assert!(matches!(
            fit_alpha_per_problem(&flat),
            Err(Error::DegenerateDesign)
        ));
    }

    #[test]
    fn per_problem_cases() {
        let cfg = SynthConfig::new(1, 5, 0.8).with_seed(2);
        let r = &synthesize_records(&cfg).unwrap()[0];
        let fit = fit_alpha_per_problem(r).unwrap();
        assert_abs_diff_eq!(fit.alpha, 0.8, epsilon = 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-9);

        // High posterior mass on the candidate with the lowest prior × evidence.
        let b = encode_evidence(3, 0, 0.8).unwrap();
        let anti = record(&[0.6, 0.3, 0.1], b.probs(), &[0.05, 0.15, 0.8]);
        assert!(fit_alpha_per_problem(&anti).unwrap().alpha < 0.0);

        let two = record(&[0.5, 0.5], &[0.9, 0.1], &[0.9, 0.1]);
        assert!(matches!(
            fit_alpha_per_problem(&two),
            Err(Error::TooFewPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn bayes_echo_gives_unit_alpha() {
        let b = encode_evidence(4, 2, 0.9).unwrap();
        let r = record(&[0.25; 4], b.probs(), b.probs());
        assert_abs_diff_eq!(
            fit_alpha_per_problem(&r).unwrap().alpha,
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn scale_covariance() {
        let cfg = SynthConfig::new(300, 4, 1.3).with_sigma(0.2).with_seed(8);
        let recs = synthesize_records(&cfg).unwrap();
        let base = fit_alpha_pooled(&recs).unwrap();
        // Multiplying every weight by a constant before normalizing leaves q1
        // unchanged; shifting y directly must be absorbed by the intercept.
        let shifted: Vec<Moments> = moments_of(&recs)
            .into_iter()
            .map(|mut m| {
                m.my += 3.7;
                m
            })
            .collect();
        for mode in [InterceptMode::PerRecord, InterceptMode::Common] {
            let a = pooled_from_moments(&moments_of(&recs), mode).unwrap();
            let b = pooled_from_moments(&shifted, mode).unwrap();
            assert_abs_diff_eq!(a.alpha, b.alpha, epsilon = 1e-12);
            assert_abs_diff_eq!(b.intercept - a.intercept, 3.7, epsilon = 1e-9);
        }
        assert_eq!(base.alpha, fit_alpha_pooled(&recs).unwrap().alpha);
    }

    #[test]
    fn per_problem_mean_matches_pooled_on_homogeneous_data() {
        let cfg = SynthConfig::new(500, 6, 1.1).with_sigma(0.05).with_seed(21);
        let recs = synthesize_records(&cfg).unwrap();
        let pooled = fit_alpha_pooled(&recs).unwrap().alpha;
        let per: Vec<f64> = recs
            .iter()
            .map(|r| fit_alpha_per_problem(r).unwrap().alpha)
            .collect();
        let mean = per.iter().sum::<f64>() / per.len() as f64;
        assert!((mean - pooled).abs() / pooled < 0.02);
    }

    #[test]
    fn geometric_mean_examples() {
        let g = geometric_mean_alpha(&[0.838, 0.815, 0.813, 0.784, 0.742, 0.737, 0.543]).unwrap();
        let oracle = (0.838f64 * 0.815 * 0.813 * 0.784 * 0.742 * 0.737 * 0.543).powf(1.0 / 7.0);
        assert_abs_diff_eq!(g.geo_mean, oracle, epsilon = 1e-12);
        assert_abs_diff_eq!(g.geo_mean, 0.747, epsilon = 5e-4);
        assert_eq!(g.verdict, Stability::Stable);

        let ones = geometric_mean_alpha(&[1.0; 5]).unwrap();
        assert_eq!(ones.geo_mean, 1.0);
        assert_eq!(ones.verdict, Stability::Marginal);

        let mixed = geometric_mean_alpha(&[1.2, 0.5]).unwrap();
        assert_abs_diff_eq!(mixed.geo_mean, 0.6f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(mixed.product_sq, 0.36, epsilon = 1e-12);
        assert_eq!(mixed.verdict, Stability::Stable);

        assert_eq!(
            geometric_mean_alpha(&[1.1, 1.2]).unwrap().verdict,
            Stability::Unstable
        );
        assert!(geometric_mean_alpha(&[0.5, 0.0]).is_err());
        assert!(geometric_mean_alpha(&[]).is_err());
    }

    #[test]
    fn csv_row_layout() {
        let recs = synthesize_records(&SynthConfig::new(10, 4, 1.0)).unwrap();
        let fit = fit_alpha_pooled(&recs).unwrap();
        let row = fit.csv_row();
        assert_eq!(row.len(), FitResult::CSV_HEADER.len());
        assert_eq!(row[0], "pooled_ols");
        assert_eq!(row[7], "");
    }
}
