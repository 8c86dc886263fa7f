//! OpenAI-compatible chat-completion access: bounded concurrency, retries,
//! response caching and token/cost accounting.

mod cache;
mod cost;
mod http;
mod mock;

use std::time::Duration;

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ChunkRef;

pub use cache::{cache_key, CacheEntry, CachedGateway, ResponseCache};
pub use cost::{cost_per_question, total_cost, CostError};
pub use http::{HttpGateway, API_KEY_ENV};
pub use mock::FnGateway;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub request_timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// Currency per 1M input tokens.
    pub price_in: f64,
    /// Currency per 1M output tokens.
    pub price_out: f64,
    /// First retry delay; doubles per attempt.
    pub retry_base_delay_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            base_url: "https://generativelanguage.googleapis.com/v1beta/openai".into(),
            model: "gemini-2.5-pro".into(),
            temperature: 0.0,
            max_output_tokens: 16_384,
            request_timeout_secs: 300,
            max_retries: 4,
            max_in_flight: 4,
            price_in: 1.25,
            price_out: 10.0,
            retry_base_delay_ms: 1_000,
        }
    }
}

impl LlmConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |msg: String| Err(GatewayError::InvalidConfig(msg));
        if self.max_in_flight < 1 {
            return bad("max_in_flight must be >= 1".into());
        }
        if !(self.price_in >= 0.0 && self.price_out >= 0.0) {
            return bad(format!("prices must be >= 0, got {}/{}", self.price_in, self.price_out));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.base_url.trim().is_empty() {
            return bad("base_url is empty".into());
        }
        Ok(())
    }

    pub(crate) fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << (attempt.saturating_sub(1)).min(16);
        Duration::from_millis(self.retry_base_delay_ms.saturating_mul(factor).min(30_000))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    /// 1-based number of the attempt that produced this result.
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_ref: Option<ChunkRef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_ref: Option<ChunkRef>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            chunk_ref: None,
        }
    }

    pub fn for_chunk(prompt: impl Into<String>, chunk_ref: ChunkRef) -> Self {
        Self {
            prompt: prompt.into(),
            chunk_ref: Some(chunk_ref),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: LlmUsage,
    pub cached: bool,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport {
        message: String,
        attempts: u32,
        usage: Option<LlmUsage>,
    },
    #[error("authentication rejected (HTTP {status}): {message}")]
    Auth { status: u16, message: String },
    #[error("prompt rejected for length, reduce the chunk window: {message}")]
    ContextOverflow { message: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
    #[error("no cached response for key {key} (replay mode)")]
    CacheMiss { key: String },
    #[error("cache I/O: {0}")]
    Cache(#[from] std::io::Error),
    #[error("invalid LLM config: {0}")]
    InvalidConfig(String),
}

/// Anything that turns a prompt into completion text.
#[async_trait]
pub trait Gateway: Send + Sync {
    async fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError>;
}

#[async_trait]
impl<G: Gateway + ?Sized> Gateway for std::sync::Arc<G> {
    async fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        (**self).complete(request).await
    }
}

/// Run all requests with at most `max_in_flight` outstanding. Results come
/// back in request order regardless of completion order.
pub async fn complete_all(
    gateway: &dyn Gateway,
    requests: &[CompletionRequest],
    max_in_flight: usize,
) -> Vec<Result<Completion, GatewayError>> {
    stream::iter(requests.iter().map(|r| gateway.complete(r)))
        .buffered(max_in_flight.max(1))
        .collect()
        .await
}
