use std::time::{Duration, Instant};

use async_trait::async_trait;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::json;

use super::{Completion, CompletionRequest, Gateway, GatewayError, LlmConfig, LlmUsage};
use crate::prompting::PROMPT_ROLE;

pub const API_KEY_ENV: &str = "VQAMINER_API_KEY";

pub struct HttpGateway {
    client: reqwest::Client,
    cfg: LlmConfig,
    api_key: Option<String>,
    endpoint: String,
}

impl HttpGateway {
    pub fn new(cfg: LlmConfig, api_key: Option<String>) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(cfg.request_timeout_secs.max(1)))
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        let endpoint = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
        Ok(Self {
            client,
            cfg,
            api_key,
            endpoint,
        })
    }

    pub fn from_env(cfg: LlmConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(cfg, key)
    }

    pub fn config(&self) -> &LlmConfig {
        &self.cfg
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct UsageBody {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

enum Outcome {
    Done(Completion),
    Fatal(GatewayError),
    Transient(String),
}

fn is_context_overflow(body: &str) -> bool {
    let lower = body.to_lowercase();
    ["context_length", "context length", "maximum context", "too many tokens", "prompt is too long", "input is too long"]
        .iter()
        .any(|m| lower.contains(m))
}

impl HttpGateway {
    async fn attempt(&self, request: &CompletionRequest, attempt: u32) -> Outcome {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": PROMPT_ROLE, "content": request.prompt}],
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_output_tokens,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let started = Instant::now();
        let resp = match req.send().await {
            Ok(r) => r,
            Err(e) => return Outcome::Transient(e.to_string()),
        };
        let status = resp.status();
        let text = match resp.text().await {
            Ok(t) => t,
            Err(e) => return Outcome::Transient(e.to_string()),
        };
        let latency_ms = started.elapsed().as_millis() as u64;

        if status.is_success() {
            let parsed: ChatResponse = match serde_json::from_str(&text) {
                Ok(p) => p,
                Err(e) => return Outcome::Fatal(GatewayError::Protocol(format!("bad body: {e}"))),
            };
            let Some(content) = parsed.choices.into_iter().next().and_then(|c| c.message.content) else {
                return Outcome::Fatal(GatewayError::Protocol("no choices in response".into()));
            };
            let usage = parsed.usage.unwrap_or_default();
            return Outcome::Done(Completion {
                text: content,
                usage: LlmUsage {
                    prompt_tokens: usage.prompt_tokens,
                    completion_tokens: usage.completion_tokens,
                    latency_ms,
                    attempt,
                    chunk_ref: request.chunk_ref.clone(),
                },
                cached: false,
            });
        }
        match status {
            StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => Outcome::Fatal(GatewayError::Auth {
                status: status.as_u16(),
                message: text,
            }),
            StatusCode::TOO_MANY_REQUESTS | StatusCode::REQUEST_TIMEOUT => {
                Outcome::Transient(format!("HTTP {status}"))
            }
            s if s.is_server_error() => Outcome::Transient(format!("HTTP {status}")),
            StatusCode::PAYLOAD_TOO_LARGE => Outcome::Fatal(GatewayError::ContextOverflow { message: text }),
            StatusCode::BAD_REQUEST if is_context_overflow(&text) => {
                Outcome::Fatal(GatewayError::ContextOverflow { message: text })
            }
            _ => Outcome::Fatal(GatewayError::Protocol(format!("HTTP {status}: {text}"))),
        }
    }
}

#[async_trait]
impl Gateway for HttpGateway {
    async fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        let max_attempts = self.cfg.max_retries + 1;
        let mut attempt = 1;
        loop {
            match self.attempt(request, attempt).await {
                Outcome::Done(c) => return Ok(c),
                Outcome::Fatal(e) => return Err(e),
                Outcome::Transient(message) if attempt >= max_attempts => {
                    return Err(GatewayError::Transport {
                        message,
                        attempts: attempt,
                        usage: Some(LlmUsage {
                            attempt,
                            chunk_ref: request.chunk_ref.clone(),
                            ..LlmUsage::default()
                        }),
                    });
                }
                Outcome::Transient(message) => {
                    tracing::debug!(attempt, %message, "retrying completion");
                    tokio::time::sleep(self.cfg.backoff(attempt)).await;
                    attempt += 1;
                }
            }
        }
    }
}
