use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use alphalaw::evidence::{encode_evidence, DEFAULT_STRENGTH};
use alphalaw::records::{record_to_json, RevisionRecord, SourceMethod};
use alphalaw::seeding::stream_rng;

use crate::error::{CollectionError, Result};
use crate::parse::parse_probability_response;
use crate::prompts::PromptSet;
use crate::provider::{
    complete_with_retry, CompletionRequest, ElicitationContext, Provider, Stage,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Candidates per generated problem.
    pub m_candidates: usize,
    pub temperature: f64,
    pub evidence_strength: f64,
    pub max_tokens: u32,
    /// Extra attempts after a retryable failure.
    pub max_retries: u32,
    pub request_timeout_secs: f64,
    /// Base delay of the exponential backoff.
    pub retry_backoff_ms: u64,
    /// Problems in flight at once.
    pub concurrency: usize,
    pub endpoint: Option<String>,
    pub model_name: String,
    /// Environment variable holding the bearer token.
    pub auth_token_env_var: Option<String>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            m_candidates: 8,
            temperature: 0.7,
            evidence_strength: DEFAULT_STRENGTH,
            max_tokens: 256,
            max_retries: 3,
            request_timeout_secs: 60.0,
            retry_backoff_ms: 500,
            concurrency: 4,
            endpoint: None,
            model_name: "mock".into(),
            auth_token_env_var: None,
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CollectionError::Config(m));
        if self.m_candidates < 2 {
            return bad(format!(
                "m_candidates must be at least 2, got {}",
                self.m_candidates
            ));
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            ));
        }
        if !(self.request_timeout_secs.is_finite() && self.request_timeout_secs > 0.0) {
            return bad(format!(
                "request timeout must be positive, got {}",
                self.request_timeout_secs
            ));
        }
        if self.concurrency == 0 {
            return bad("concurrency must be at least 1".into());
        }
        encode_evidence(self.m_candidates, 0, self.evidence_strength)?;
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_secs)
    }

    pub fn retry_backoff(&self) -> Duration {
        Duration::from_millis(self.retry_backoff_ms)
    }
}

/// A question with its candidate answers and the verified one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub prompt: String,
    pub options: Vec<String>,
    pub correct_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
}

impl Problem {
    fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(CollectionError::InvalidProblem {
                id: self.id.clone(),
                reason,
            })
        };
        if self.options.len() < 2 {
            return bad(format!(
                "need at least 2 options, got {}",
                self.options.len()
            ));
        }
        if self.correct_index >= self.options.len() {
            return bad(format!(
                "correct_index {} out of range for {} options",
                self.correct_index,
                self.options.len()
            ));
        }
        Ok(())
    }
}

/// Reads one problem per non-blank line.
pub fn read_problems(path: &Path) -> Result<Vec<Problem>> {
    let io = |source| CollectionError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Problem =
            serde_json::from_str(&line).map_err(|e| CollectionError::InvalidProblem {
                id: format!("line {}", i + 1),
                reason: e.to_string(),
            })?;
        out.push(p);
    }
    Ok(out)
}

/// Placeholder problems with `m` generic options each and a seeded correct
/// index, for running the protocol without a benchmark.
pub fn synthetic_problems(n: usize, m: usize, seed: u64) -> Vec<Problem> {
    (0..n)
        .map(|i| Problem {
            id: format!("mock-{i:06}"),
            prompt: format!("Synthetic question {i}."),
            options: (1..=m).map(|j| format!("candidate {j}")).collect(),
            correct_index: stream_rng(seed, i as u64).random_range(0..m),
            dataset: Some("synthetic".into()),
        })
        .collect()
}

fn format_probs(p: &[f64]) -> String {
    let items: Vec<String> = p.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", items.join(", "))
}

fn numbered(options: &[String]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {o}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Runs prior elicitation, verification and posterior elicitation for one
/// problem. The two requests are issued strictly in order.
///
/// An unparseable reply is replaced by the uniform distribution and the
/// record is flagged as a fallback; the raw reply is kept in `raw_prior` or
/// `raw_posterior`. Transport failures surviving the retries abort the
/// problem without a record.
pub async fn run_protocol(
    problem: &Problem,
    config: &ProtocolConfig,
    prompts: &PromptSet,
    provider: &dyn Provider,
) -> Result<RevisionRecord> {
    problem.validate()?;
    let k = problem.options.len();
    let evidence = encode_evidence(k, problem.correct_index, config.evidence_strength)?;
    let options = numbered(&problem.options);
    let k_str = k.to_string();

    let prior_prompt = prompts.render_prior(&[
        ("k", &k_str),
        ("question", &problem.prompt),
        ("options", &options),
    ]);
    let request = |prompt: String, stage, prior: Option<Vec<f64>>, evidence: Option<Vec<f64>>| {
        CompletionRequest {
            prompt,
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            context: ElicitationContext {
                problem_id: problem.id.clone(),
                stage,
                k,
                prior,
                evidence,
            },
        }
    };
    let reply = complete_with_retry(
        provider,
        &request(prior_prompt, Stage::Prior, None, None),
        config.max_retries,
        config.retry_backoff(),
    )
    .await?;
    let prior = parse_probability_response(&reply, k);

    let posterior_prompt = prompts.render_posterior(&[
        ("k", &k_str),
        ("question", &problem.prompt),
        ("options", &options),
        ("prior", &format_probs(prior.probs.probs())),
        ("verified", &(problem.correct_index + 1).to_string()),
        ("strength", &config.evidence_strength.to_string()),
        ("evidence", &format_probs(evidence.probs())),
    ]);
    let reply = complete_with_retry(
        provider,
        &request(
            posterior_prompt,
            Stage::Posterior,
            Some(prior.probs.probs().to_vec()),
            Some(evidence.probs().to_vec()),
        ),
        config.max_retries,
        config.retry_backoff(),
    )
    .await?;
    let posterior = parse_probability_response(&reply, k);

    let mut extra = Map::new();
    let mut source_method = SourceMethod::Llm;
    for (key, r) in [("raw_prior", &prior), ("raw_posterior", &posterior)] {
        if r.source_method == SourceMethod::Fallback {
            source_method = SourceMethod::Fallback;
            extra.insert(key.into(), Value::String(r.raw_text.clone()));
        }
    }
    Ok(RevisionRecord {
        problem_id: problem.id.clone(),
        model: config.model_name.clone(),
        dataset: problem.dataset.clone().unwrap_or_else(|| "unknown".into()),
        q0: prior.probs,
        evidence,
        q1: posterior.probs,
        source_method,
        step: 1,
        correct_index: Some(problem.correct_index),
        s: Some(config.evidence_strength),
        extra,
    })
}

/// Counts from a collection run.
#[derive(Debug, Default)]
pub struct CollectionSummary {
    pub written: usize,
    pub fallback: usize,
    pub failures: Vec<(String, CollectionError)>,
}

/// Collects every problem with up to `config.concurrency` in flight and
/// writes each record as one JSON line, in input order.
pub async fn collect_into<W: Write>(
    problems: &[Problem],
    config: &ProtocolConfig,
    prompts: &PromptSet,
    provider: &dyn Provider,
    mut out: W,
) -> Result<CollectionSummary> {
    config.validate()?;
    let mut summary = CollectionSummary::default();
    let mut results = stream::iter(problems)
        .map(|p| async move {
            (
                p.id.clone(),
                run_protocol(p, config, prompts, provider).await,
            )
        })
        .buffered(config.concurrency);
    let io = |source| CollectionError::Io {
        path: "<output>".into(),
        source,
    };
    while let Some((id, result)) = results.next().await {
        match result {
            Ok(record) => {
                let line = record_to_json(&record)?;
                writeln!(out, "{line}").map_err(io)?;
                summary.written += 1;
                if record.source_method == SourceMethod::Fallback {
                    summary.fallback += 1;
                }
            }
            Err(e) => {
                log::error!("{id}: {e}");
                summary.failures.push((id, e));
            }
        }
    }
    out.flush().map_err(io)?;
    Ok(summary)
}

/// [`collect_into`] gathering records in memory.
pub async fn collect_records(
    problems: &[Problem],
    config: &ProtocolConfig,
    prompts: &PromptSet,
    provider: &dyn Provider,
) -> Result<(Vec<RevisionRecord>, CollectionSummary)> {
    let mut buf = Vec::new();
    let summary = collect_into(problems, config, prompts, provider, &mut buf).await?;
    let (records, errors) = alphalaw::records::parse_records(buf.as_slice());
    if let Some(e) = errors.first() {
        return Err(CollectionError::Response(format!(
            "collected record failed validation: {e}"
        )));
    }
    Ok((records, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let c = ProtocolConfig::default();
        assert_eq!(c.m_candidates, 8);
        assert_eq!(c.temperature, 0.7);
        assert!(c.validate().is_ok());
        let bad = ProtocolConfig {
            m_candidates: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ProtocolConfig {
            evidence_strength: 0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn synthetic_problems_are_seeded() {
        let a = synthetic_problems(20, 8, 3);
        assert_eq!(a, synthetic_problems(20, 8, 3));
        assert!(a
            .iter()
            .all(|p| p.options.len() == 8 && p.correct_index < 8));
        assert_ne!(a, synthetic_problems(20, 8, 4));
    }

    #[test]
    fn problem_validation() {
        let mut p = synthetic_problems(1, 3, 0).remove(0);
        p.correct_index = 3;
        assert!(p.validate().is_err());
        p.options.truncate(1);
        p.correct_index = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn prompt_helpers() {
        assert_eq!(format_probs(&[0.5, 0.25]), "[0.5000, 0.2500]");
        assert_eq!(numbered(&["a".into(), "b".into()]), "1. a\n2. b");
    }
}
