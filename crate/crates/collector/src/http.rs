use std::time::Duration;

use async_trait::async_trait;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CollectionError, Result};
use crate::provider::{CompletionRequest, Provider};

#[derive(Serialize)]
struct Message<'a> {
    role: &'static str,
    content: &'a str,
}

/// Request body sent to the endpoint.
#[derive(Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: [Message<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

/// Chat-completion adapter over HTTP.
///
/// Posts `{model, messages: [{role: "user", content}], temperature,
/// max_tokens}` as JSON with an optional bearer token, and reads the reply
/// from `choices[0].message.content`, `choices[0].text`, `content` or
/// `text`, whichever is present first.
#[derive(Debug, Clone)]
pub struct HttpProvider {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    token: Option<String>,
}

impl HttpProvider {
    /// `token_env_var`, when given, names an environment variable that must
    /// hold the bearer token.
    pub fn new(
        endpoint: &str,
        model: &str,
        token_env_var: Option<&str>,
        timeout: Duration,
    ) -> Result<Self> {
        let token = match token_env_var {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| CollectionError::MissingToken(var.into()))?)
            }
            None => None,
        };
        Self::with_token(endpoint, model, token, timeout)
    }

    pub fn with_token(
        endpoint: &str,
        model: &str,
        token: Option<String>,
        timeout: Duration,
    ) -> Result<Self> {
        if !(endpoint.starts_with("http://") || endpoint.starts_with("https://")) {
            return Err(CollectionError::Config(format!(
                "endpoint must be an http(s) URL, got `{endpoint}`"
            )));
        }
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| CollectionError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
            model: model.into(),
            token,
        })
    }
}

/// Extracts the reply text from the common response shapes.
pub fn extract_reply(body: &Value) -> Option<&str> {
    let choice = body.get("choices").and_then(|c| c.get(0));
    choice
        .and_then(|c| c.pointer("/message/content"))
        .or_else(|| choice.and_then(|c| c.get("text")))
        .or_else(|| body.get("content"))
        .or_else(|| body.get("text"))
        .and_then(Value::as_str)
}

#[async_trait]
impl Provider for HttpProvider {
    async fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let body = ChatBody {
            model: &self.model,
            messages: [Message {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let transport = |e: reqwest::Error| CollectionError::Transport {
            attempts: 1,
            message: e.to_string(),
        };
        let resp = req.send().await.map_err(transport)?;
        let status = resp.status();
        let text = resp.text().await.map_err(transport)?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(CollectionError::Transport {
                attempts: 1,
                message: format!("status {status}"),
            });
        }
        if !status.is_success() {
            return Err(CollectionError::Rejected {
                status: status.as_u16(),
                body: text,
            });
        }
        let json: Value =
            serde_json::from_str(&text).map_err(|e| CollectionError::Response(e.to_string()))?;
        extract_reply(&json)
            .map(str::to_owned)
            .ok_or_else(|| CollectionError::Response("no reply text in response body".into()))
    }

    fn name(&self) -> &str {
        &self.model
    }
}
