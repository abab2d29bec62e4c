use std::io::Write;

use serde::Serialize;

use super::twofold::Twofold;
use super::{fixed_point, AlphaSchedule, FixedPoint, MARGINAL_TOL};
use crate::error::{Error, Result};
use crate::estimation::fmt_float;
use crate::evidence::EvidenceDist;
use crate::report::Table;
use crate::simplex::{kl_from_log_ratio, logsumexp, normalize_log, BeliefDist};

/// What distances along a trajectory are measured against.
#[derive(Debug, Clone, Serialize)]
pub enum Reference {
    /// The fixed point of a constant exponent α ≠ 1.
    FixedPoint(FixedPoint),
    /// A second chain driven by the same schedule and evidence from a
    /// different start. Used when no common fixed point exists (per-step
    /// schedules, α = 1).
    Companion { start: BeliefDist },
}

/// An iterated revision chain with its distances to the reference.
///
/// The chain is advanced on unnormalized log-weights in double-double
/// precision; `states` are the floored distributions, `log_states` the
/// normalized log-probabilities without the floor.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub states: Vec<BeliefDist>,
    pub log_states: Vec<Vec<f64>>,
    pub kl_to_fixed: Vec<f64>,
    pub hilbert_to_fixed: Vec<f64>,
    pub schedule: AlphaSchedule,
    pub evidence: EvidenceDist,
    pub reference: Reference,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    /// Exponent that produced state `t` (`t >= 1`).
    pub fn alpha_into(&self, t: usize) -> f64 {
        self.schedule.alpha_at(t - 1)
    }

    /// Table with columns `step, q_0..q_{K-1}, alpha_t, kl_to_fixed,
    /// hilbert_to_fixed`. `alpha_t` is the exponent that produced the row's
    /// state and is empty on step 0.
    pub fn to_table(&self, name: &str) -> Table {
        let k = self.states[0].k();
        let mut header = vec!["step".to_string()];
        header.extend((0..k).map(|i| format!("q_{i}")));
        header.extend(["alpha_t", "kl_to_fixed", "hilbert_to_fixed"].map(String::from));
        let mut table = Table {
            name: name.into(),
            header,
            rows: Vec::with_capacity(self.states.len()),
        };
        for (t, state) in self.states.iter().enumerate() {
            let mut row = vec![t.to_string()];
            row.extend(state.probs().iter().map(|p| fmt_float(*p)));
            row.push(if t == 0 {
                String::new()
            } else {
                fmt_float(self.alpha_into(t))
            });
            row.push(fmt_float(self.kl_to_fixed[t]));
            row.push(fmt_float(self.hilbert_to_fixed[t]));
            table.push(row);
        }
        table
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let bytes = self.to_table("trajectory").to_csv_bytes()?;
        out.write_all(&bytes)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io("<trajectory csv>", e))
    }
}

struct Chain {
    weights: Vec<Twofold>,
}

impl Chain {
    fn new(start: &[f64]) -> Self {
        Self {
            weights: start.iter().map(|&w| Twofold::from_f64(w)).collect(),
        }
    }

    fn advance(&mut self, beta: &[f64], alpha: f64) {
        for (w, b) in self.weights.iter_mut().zip(beta) {
            *w = (*w + Twofold::from_f64(*b)) * alpha;
        }
        // Re-gauge so the largest weight is ~0; the projective distances
        // are unaffected.
        let max = self
            .weights
            .iter()
            .map(|w| w.to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = Twofold::from_f64(max);
        for w in self.weights.iter_mut() {
            *w = *w - shift;
        }
    }

    fn log_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.to_f64()).collect()
    }
}

fn normalized(log_weights: &[f64]) -> Vec<f64> {
    let lse = logsumexp(log_weights);
    log_weights.iter().map(|w| w - lse).collect()
}

fn distances(chain: &[Twofold], reference: &[Twofold], reference_log: &[f64]) -> (f64, f64) {
    let raw: Vec<Twofold> = chain.iter().zip(reference).map(|(a, b)| *a - *b).collect();
    // The gauge offset is removed before rounding so deviations far below
    // the magnitude of the weights survive.
    let offset = raw[0];
    let delta: Vec<f64> = raw.iter().map(|d| (*d - offset).to_f64()).collect();
    let (lo, hi) = delta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(*d), hi.max(*d))
        });
    let ref_probs: Vec<f64> = reference_log.iter().map(|l| l.exp()).collect();
    (kl_from_log_ratio(&ref_probs, &delta), (hi - lo).max(0.0))
}

/// Iterates `q_{t+1} = alpha_update(q_t, b, α_t)` for `steps` steps.
///
/// A constant schedule with α away from 1 is measured against its fixed
/// point; otherwise against a companion chain started from the uniform
/// distribution (or from `b` when `q0` is itself uniform).
pub fn simulate_trajectory(
    q0: &BeliefDist,
    b: &EvidenceDist,
    schedule: &AlphaSchedule,
    steps: usize,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    if !schedule.is_constant() && schedule.alphas().len() != steps {
        return Err(Error::InvalidParameter(format!(
            "schedule has {} exponents for {steps} steps",
            schedule.alphas().len()
        )));
    }
    if q0.k() != b.k() {
        return Err(Error::Dimension {
            expected: q0.k(),
            got: b.k(),
        });
    }
    let beta = b.dist().log_probs();

    let alpha0 = schedule.alpha_at(0);
    let reference = if schedule.is_constant() && (alpha0 - 1.0).abs() > MARGINAL_TOL {
        Reference::FixedPoint(fixed_point(b, alpha0)?)
    } else {
        let uniform = BeliefDist::uniform(q0.k())?;
        let start = if q0.approx_eq(&uniform) {
            b.dist().clone()
        } else {
            uniform
        };
        Reference::Companion { start }
    };

    let mut chain = Chain::new(&q0.log_probs());
    let (mut companion, fixed) = match &reference {
        Reference::FixedPoint(fp) => {
            // log q* up to a constant is αβ/(1−α), kept in double-double.
            let den = Twofold::difference(1.0, fp.alpha);
            let w: Vec<Twofold> = beta
                .iter()
                .map(|bi| Twofold::product(fp.alpha, *bi).div(den))
                .collect();
            (None, Some(w))
        }
        Reference::Companion { start } => (Some(Chain::new(&start.log_probs())), None),
    };

    let mut states = Vec::with_capacity(steps + 1);
    let mut log_states = Vec::with_capacity(steps + 1);
    let mut kl = Vec::with_capacity(steps + 1);
    let mut hilbert = Vec::with_capacity(steps + 1);

    let fixed_log = match &reference {
        Reference::FixedPoint(fp) => fp.log_q_star.clone(),
        Reference::Companion { .. } => Vec::new(),
    };

    for t in 0..=steps {
        if t > 0 {
            let alpha = schedule.alpha_at(t - 1);
            chain.advance(&beta, alpha);
            if let Some(c) = companion.as_mut() {
                c.advance(&beta, alpha);
            }
        }
        let lw = chain.log_weights();
        log_states.push(normalized(&lw));
        states.push(normalize_log(&lw)?);
        let (d_kl, d_h) = match (&fixed, &companion) {
            (Some(w_star), _) => distances(&chain.weights, w_star, &fixed_log),
            (None, Some(c)) => distances(&chain.weights, &c.weights, &normalized(&c.log_weights())),
            (None, None) => unreachable!(),
        };
        kl.push(d_kl);
        hilbert.push(d_h);
    }

    Ok(Trajectory {
        states,
        log_states,
        kl_to_fixed: kl,
        hilbert_to_fixed: hilbert,
        schedule: schedule.clone(),
        evidence: b.clone(),
        reference,
    })
}
