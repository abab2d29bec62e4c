//! Estimator recovery on synthetic records, with a direct least-squares
//! oracle for the per-record-intercept fit.

use alphalaw::estimation::{
    fit_alpha_per_problem, fit_alpha_pooled, fit_alpha_pooled_common, fit_alpha_pooled_with_ci,
    fit_two_param, InterceptMode,
};
use alphalaw::records::{synthesize_records, PriorMode, RevisionRecord, SynthConfig};

/// Slope of `y` on `x` after subtracting each record's own means.
fn within_slope(records: &[RevisionRecord]) -> f64 {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for r in records {
        let x: Vec<f64> =
            r.q0.probs()
                .iter()
                .zip(r.evidence.probs())
                .map(|(q, b)| q.ln() + b.ln())
                .collect();
        let y: Vec<f64> = r.q1.probs().iter().map(|p| p.ln()).collect();
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let my = y.iter().sum::<f64>() / y.len() as f64;
        for (xi, yi) in x.iter().zip(&y) {
            sxy += (xi - mx) * (yi - my);
            sxx += (xi - mx) * (xi - mx);
        }
    }
    sxy / sxx
}

#[test]
fn noiseless_recovery_is_exact() {
    for alpha in [0.3, 1.0, 1.163, 2.0] {
        let recs = synthesize_records(&SynthConfig::new(500, 4, alpha).with_seed(9)).unwrap();
        let fit = fit_alpha_pooled(&recs).unwrap();
        assert!((fit.alpha - alpha).abs() < 1e-9, "{alpha}: {}", fit.alpha);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pooled_fit_matches_oracle_under_noise() {
    let recs =
        synthesize_records(&SynthConfig::new(300, 6, 1.1).with_sigma(0.2).with_seed(10)).unwrap();
    let fit = fit_alpha_pooled(&recs).unwrap();
    assert!((fit.alpha - within_slope(&recs)).abs() < 1e-10);
    assert_eq!(fit.n_records, 300);
    assert_eq!(fit.n_points, 1800);
}

#[test]
fn noisy_recovery_is_close() {
    let recs =
        synthesize_records(&SynthConfig::new(2000, 4, 1.0).with_sigma(0.1).with_seed(11)).unwrap();
    let fit = fit_alpha_pooled(&recs).unwrap();
    assert!((0.98..=1.02).contains(&fit.alpha), "{}", fit.alpha);
    let common = fit_alpha_pooled_common(&recs).unwrap();
    assert_eq!(common.intercepts, InterceptMode::Common);
}

#[test]
fn bootstrap_interval_brackets_truth() {
    let recs =
        synthesize_records(&SynthConfig::new(500, 4, 1.0).with_sigma(0.1).with_seed(12)).unwrap();
    let fit = fit_alpha_pooled_with_ci(&recs, InterceptMode::PerRecord, 1000, 1).unwrap();
    let (lo, hi) = (fit.ci_low.unwrap(), fit.ci_high.unwrap());
    assert!(lo < fit.alpha && fit.alpha < hi);
    assert!(hi - lo < 0.05);
    let again = fit_alpha_pooled_with_ci(&recs, InterceptMode::PerRecord, 1000, 1).unwrap();
    assert_eq!(fit, again);
}

#[test]
fn per_problem_fits_follow_generator() {
    let recs = synthesize_records(&SynthConfig::new(50, 8, 0.7).with_seed(13)).unwrap();
    for r in &recs {
        let f = fit_alpha_per_problem(r).unwrap();
        assert!((f.alpha - 0.7).abs() < 1e-9);
    }
}

#[test]
fn two_exponent_model_on_dirichlet_priors() {
    let cfg = SynthConfig::new(200, 4, 1.0)
        .with_prior(PriorMode::Dirichlet(0.5))
        .with_exponents(alphalaw::records::Exponents::Pair {
            alpha_q0: 0.8,
            alpha_b: 1.2,
        })
        .with_seed(14);
    let recs = synthesize_records(&cfg).unwrap();
    let fit = fit_two_param(&recs).unwrap();
    assert!(fit.reliable);
    assert!((fit.alpha_q0 - 0.8).abs() < 1e-9);
    assert!((fit.alpha_b - 1.2).abs() < 1e-9);
    assert!((fit.trust_ratio - 1.5).abs() < 1e-9);
}
