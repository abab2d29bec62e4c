use std::time::Duration;

use async_trait::async_trait;
use serde::Serialize;

use crate::error::Result;

/// Which elicitation a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prior,
    Posterior,
}

/// Structured view of what a prompt asks. Real providers only see the
/// rendered prompt; simulated ones answer from this.
#[derive(Debug, Clone, PartialEq)]
pub struct ElicitationContext {
    pub problem_id: String,
    pub stage: Stage,
    pub k: usize,
    /// Parsed prior, on posterior requests.
    pub prior: Option<Vec<f64>>,
    /// Encoded verifier evidence, on posterior requests.
    pub evidence: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub context: ElicitationContext,
}

/// A chat-completion backend: one prompt in, one reply text out.
#[async_trait]
pub trait Provider: Send + Sync {
    async fn complete(&self, request: &CompletionRequest) -> Result<String>;

    fn name(&self) -> &str;
}

/// Backoff before retry `attempt` (1-based): `base · 2^(attempt−1)`, capped
/// at 30 s.
pub fn backoff_delay(base: Duration, attempt: u32) -> Duration {
    let factor = 1u32 << (attempt.saturating_sub(1)).min(16);
    (base * factor).min(Duration::from_secs(30))
}

/// Calls the provider, retrying retryable failures up to `max_retries`
/// extra times with exponential backoff.
pub async fn complete_with_retry(
    provider: &dyn Provider,
    request: &CompletionRequest,
    max_retries: u32,
    backoff: Duration,
) -> Result<String> {
    let mut attempt = 0;
    loop {
        match provider.complete(request).await {
            Ok(text) => return Ok(text),
            Err(e) if e.is_retryable() && attempt < max_retries => {
                attempt += 1;
                let delay = backoff_delay(backoff, attempt);
                log::warn!(
                    "{} ({}): {e}; retry {attempt}/{max_retries} in {delay:?}",
                    request.context.problem_id,
                    provider.name()
                );
                tokio::time::sleep(delay).await;
            }
            Err(crate::CollectionError::Transport { message, .. }) => {
                return Err(crate::CollectionError::Transport {
                    attempts: attempt + 1,
                    message,
                })
            }
            Err(e) => return Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let base = Duration::from_millis(100);
        assert_eq!(backoff_delay(base, 1), Duration::from_millis(100));
        assert_eq!(backoff_delay(base, 3), Duration::from_millis(400));
        assert_eq!(backoff_delay(base, 40), Duration::from_secs(30));
    }
}
