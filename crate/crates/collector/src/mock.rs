use async_trait::async_trait;
use rand::Rng;
use sha2::{Digest, Sha256};

use alphalaw::dynamics::alpha_update;
use alphalaw::evidence::EvidenceDist;
use alphalaw::records::PriorMode;
use alphalaw::seeding::stream_rng;
use alphalaw::simplex::BeliefDist;

use crate::error::{CollectionError, Result};
use crate::provider::{CompletionRequest, Provider, Stage};

/// Reply used when the mock decides to misbehave.
pub const MALFORMED_REPLY: &str = "I am not sure.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockBehavior {
    /// Priors drawn from `prior`, posteriors `∝ (q0 · b)^α` exactly.
    AlphaFollower,
    /// Every reply is unparseable.
    Malformed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockConfig {
    pub behavior: MockBehavior,
    pub alpha: f64,
    pub prior: PriorMode,
    /// Share of problems whose posterior reply is unparseable.
    pub fail_rate: f64,
    pub seed: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        Self {
            behavior: MockBehavior::AlphaFollower,
            alpha: 1.0,
            prior: PriorMode::Dirichlet(1.0),
            fail_rate: 0.0,
            seed: 0,
        }
    }
}

/// Deterministic stand-in for a model. Every reply depends only on the
/// seed, the problem id and the request, never on call order.
#[derive(Debug, Clone)]
pub struct MockProvider {
    config: MockConfig,
}

impl MockProvider {
    pub fn new(config: MockConfig) -> Result<Self> {
        if !(config.alpha.is_finite() && config.alpha >= 0.0) {
            return Err(CollectionError::Config(format!(
                "mock alpha must be non-negative, got {}",
                config.alpha
            )));
        }
        if !(0.0..=1.0).contains(&config.fail_rate) {
            return Err(CollectionError::Config(format!(
                "mock fail rate must be in [0, 1], got {}",
                config.fail_rate
            )));
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &MockConfig {
        &self.config
    }

    fn problem_seed(&self, problem_id: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.config.seed.to_le_bytes());
        h.update(problem_id.as_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
    }

    fn fails(&self, problem_id: &str) -> bool {
        self.config.fail_rate > 0.0
            && stream_rng(self.problem_seed(problem_id), 2).random::<f64>() < self.config.fail_rate
    }

    fn reply(&self, request: &CompletionRequest) -> Result<String> {
        let ctx = &request.context;
        if self.config.behavior == MockBehavior::Malformed {
            return Ok(MALFORMED_REPLY.into());
        }
        let probs = match ctx.stage {
            Stage::Prior => {
                let mut rng = stream_rng(self.problem_seed(&ctx.problem_id), 0);
                self.config.prior.sample(ctx.k, &mut rng)?
            }
            Stage::Posterior => {
                if self.fails(&ctx.problem_id) {
                    return Ok(MALFORMED_REPLY.into());
                }
                let missing = || {
                    CollectionError::Config("posterior request without prior and evidence".into())
                };
                let prior = BeliefDist::new(ctx.prior.clone().ok_or_else(missing)?)?;
                let evidence = EvidenceDist::from_dist(BeliefDist::new(
                    ctx.evidence.clone().ok_or_else(missing)?,
                )?);
                alpha_update(&prior, &evidence, self.config.alpha)?.into_vec()
            }
        };
        serde_json::to_string(&probs).map_err(|e| CollectionError::Response(e.to_string()))
    }
}

#[async_trait]
impl Provider for MockProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String> {
        self.reply(request)
    }

    fn name(&self) -> &str {
        "mock"
    }
}
