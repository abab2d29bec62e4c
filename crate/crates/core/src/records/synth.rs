use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Map;

use super::{RevisionRecord, SourceMethod};
use crate::dynamics::AlphaSchedule;
use crate::error::{Error, Result};
use crate::evidence::{encode_evidence, EvidenceDist};
use crate::seeding::stream_rng;
use crate::simplex::{logsumexp, BeliefDist, FLOOR};

/// Draws that would put any probability below the floor are redrawn; this
/// many failures in a row is treated as an unusable configuration.
const MAX_ATTEMPTS: usize = 1000;

/// Family the synthetic priors are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "concentration", rename_all = "lowercase")]
pub enum PriorMode {
    Uniform,
    Dirichlet(f64),
}

impl PriorMode {
    pub const DEFAULT_CONCENTRATION: f64 = 0.5;

    /// One draw of a `k`-candidate prior.
    pub fn sample<R: Rng>(self, k: usize, rng: &mut R) -> Result<Vec<f64>> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("need K >= 2, got {k}")));
        }
        if let PriorMode::Dirichlet(c) = self {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "dirichlet concentration must be positive, got {c}"
                )));
            }
        }
        Ok(draw_prior(rng, k, self))
    }
}

impl fmt::Display for PriorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorMode::Uniform => f.write_str("uniform"),
            PriorMode::Dirichlet(c) => write!(f, "dirichlet:{c}"),
        }
    }
}

impl FromStr for PriorMode {
    type Err = Error;

    /// Accepts `uniform`, `dirichlet` or `dirichlet:<concentration>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown prior mode `{s}`"));
        match s.split_once(':') {
            None if s == "uniform" => Ok(PriorMode::Uniform),
            None if s == "dirichlet" => Ok(PriorMode::Dirichlet(Self::DEFAULT_CONCENTRATION)),
            Some(("dirichlet", c)) => {
                let c: f64 = c.parse().map_err(|_| bad())?;
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "dirichlet concentration must be positive, got {c}"
                    )));
                }
                Ok(PriorMode::Dirichlet(c))
            }
            _ => Err(bad()),
        }
    }
}

/// Generating exponents: one shared α, or separate weights on prior and
/// evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponents {
    Single(f64),
    Pair { alpha_q0: f64, alpha_b: f64 },
}

impl Exponents {
    fn split(self) -> (f64, f64) {
        match self {
            Exponents::Single(a) => (a, a),
            Exponents::Pair { alpha_q0, alpha_b } => (alpha_q0, alpha_b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub n: usize,
    pub k: usize,
    pub exponents: Exponents,
    pub prior: PriorMode,
    /// Evidence strength.
    pub s: f64,
    /// Standard deviation of the per-coordinate log-weight noise.
    pub sigma: f64,
    pub seed: u64,
    pub model: String,
    pub dataset: String,
}

impl SynthConfig {
    /// `n` records over `k` candidates with a shared exponent; Dirichlet(0.5)
    /// priors, s = 0.9, no noise, seed 0.
    pub fn new(n: usize, k: usize, alpha: f64) -> Self {
        Self {
            n,
            k,
            exponents: Exponents::Single(alpha),
            prior: PriorMode::Dirichlet(PriorMode::DEFAULT_CONCENTRATION),
            s: crate::evidence::DEFAULT_STRENGTH,
            sigma: 0.0,
            seed: 0,
            model: "synthetic".into(),
            dataset: "synthetic".into(),
        }
    }

    pub fn with_prior(mut self, prior: PriorMode) -> Self {
        self.prior = prior;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_strength(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn with_exponents(mut self, exponents: Exponents) -> Self {
        self.exponents = exponents;
        self
    }

    pub fn with_labels(mut self, model: &str, dataset: &str) -> Self {
        self.model = model.into();
        self.dataset = dataset.into();
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        let (a, b) = self.exponents.split();
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "generating exponents must be positive, got ({a}, {b})"
            )));
        }
        if let PriorMode::Dirichlet(c) = self.prior {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "dirichlet concentration must be positive, got {c}"
                )));
            }
        }
        encode_evidence(self.k, 0, self.s).map(|_| ())
    }
}

fn draw_prior<R: Rng>(rng: &mut R, k: usize, prior: PriorMode) -> Vec<f64> {
    match prior {
        PriorMode::Uniform => vec![1.0 / k as f64; k],
        PriorMode::Dirichlet(c) => {
            let gamma = Gamma::new(c, 1.0).expect("validated concentration");
            let g: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
            let sum: f64 = g.iter().sum();
            g.into_iter().map(|x| x / sum).collect()
        }
    }
}

/// `exp` of normalized log-weights, or `None` if an entry would fall below
/// the floor.
fn softmax_above_floor(weights: &[f64]) -> Option<Vec<f64>> {
    let lse = logsumexp(weights);
    let floor = FLOOR.ln();
    if weights
        .iter()
        .any(|w| !(w - lse).is_finite() || w - lse < floor)
    {
        return None;
    }
    Some(weights.iter().map(|w| (w - lse).exp()).collect())
}

fn revise<R: Rng>(
    rng: &mut R,
    q0: &[f64],
    b: &EvidenceDist,
    (a_q0, a_b): (f64, f64),
    sigma: f64,
) -> Option<Vec<f64>> {
    let weights: Vec<f64> = q0
        .iter()
        .zip(b.probs())
        .map(|(q, bi)| {
            let eps: f64 = if sigma > 0.0 {
                sigma * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            a_q0 * q.ln() + a_b * bi.ln() + eps
        })
        .collect();
    softmax_above_floor(&weights)
}

fn exhausted() -> Error {
    Error::InvalidParameter(format!(
        "no draw within {MAX_ATTEMPTS} attempts kept every probability above {FLOOR}; \
         use a smaller exponent or a larger prior concentration"
    ))
}

fn make_record(
    config: &SynthConfig,
    problem: usize,
    step: u32,
    q0: Vec<f64>,
    evidence: EvidenceDist,
    q1: Vec<f64>,
) -> Result<RevisionRecord> {
    let correct = evidence.correct_index();
    Ok(RevisionRecord {
        problem_id: format!("synth-{problem:06}"),
        model: config.model.clone(),
        dataset: config.dataset.clone(),
        q0: BeliefDist::new(q0)?,
        evidence,
        q1: BeliefDist::new(q1)?,
        source_method: SourceMethod::Llm,
        step,
        correct_index: correct,
        s: Some(config.s),
        extra: Map::new(),
    })
}

/// Draws records whose posteriors follow
/// `log q1 = α_q0·log q0 + α_b·log b + ε + c` exactly, with `ε ~ N(0, σ²)`
/// per coordinate.
///
/// Record `i` uses its own generator derived from `(seed, i)`, so output is
/// independent of thread count.
pub fn synthesize_records(config: &SynthConfig) -> Result<Vec<RevisionRecord>> {
    config.validate()?;
    let exps = config.exponents.split();
    (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, i as u64);
            for _ in 0..MAX_ATTEMPTS {
                let q0 = draw_prior(&mut rng, config.k, config.prior);
                let correct = rng.random_range(0..config.k);
                let b = encode_evidence(config.k, correct, config.s)?;
                if q0.iter().any(|p| *p < FLOOR) {
                    continue;
                }
                if let Some(q1) = revise(&mut rng, &q0, &b, exps, config.sigma) {
                    return make_record(config, i, 1, q0, b, q1);
                }
            }
            Err(exhausted())
        })
        .collect()
}

/// Multi-step chains: each problem is revised `steps` times against the same
/// evidence, the posterior of step `t` becoming the prior of step `t + 1`,
/// with exponent `schedule.alpha_at(t)`. Records are ordered by problem,
/// then step. `config.exponents` is ignored.
pub fn synthesize_multistep(
    config: &SynthConfig,
    schedule: &AlphaSchedule,
    steps: usize,
) -> Result<Vec<RevisionRecord>> {
    config.validate()?;
    if steps == 0 || (!schedule.is_constant() && schedule.alphas().len() != steps) {
        return Err(Error::InvalidParameter(format!(
            "schedule has {} exponents for {steps} steps",
            schedule.alphas().len()
        )));
    }
    let chains: Vec<Vec<RevisionRecord>> = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(config.seed, i as u64);
            'attempt: for _ in 0..MAX_ATTEMPTS {
                let q0 = draw_prior(&mut rng, config.k, config.prior);
                let correct = rng.random_range(0..config.k);
                let b = encode_evidence(config.k, correct, config.s)?;
                if q0.iter().any(|p| *p < FLOOR) {
                    continue;
                }
                let mut prev = q0;
                let mut chain = Vec::with_capacity(steps);
                for t in 0..steps {
                    let a = schedule.alpha_at(t);
                    let Some(q1) = revise(&mut rng, &prev, &b, (a, a), config.sigma) else {
                        continue 'attempt;
                    };
                    chain.push((prev, q1.clone()));
                    prev = q1;
                }
                return chain
                    .into_iter()
                    .enumerate()
                    .map(|(t, (q0, q1))| make_record(config, i, t as u32 + 1, q0, b.clone(), q1))
                    .collect();
            }
            Err(exhausted())
        })
        .collect::<Result<_>>()?;
    Ok(chains.into_iter().flatten().collect())
}
