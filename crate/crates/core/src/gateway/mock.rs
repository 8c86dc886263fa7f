use std::sync::atomic::{AtomicU64, Ordering};

use async_trait::async_trait;

use super::{Completion, CompletionRequest, Gateway, GatewayError, LlmUsage};

/// In-process gateway driven by a closure. Token counts are estimated at
/// four bytes per token.
pub struct FnGateway<F> {
    respond: F,
    calls: AtomicU64,
}

impl<F> FnGateway<F>
where
    F: Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync,
{
    pub fn new(respond: F) -> Self {
        Self {
            respond,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

#[async_trait]
impl<F> Gateway for FnGateway<F>
where
    F: Fn(&CompletionRequest) -> Result<String, GatewayError> + Send + Sync,
{
    async fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let text = (self.respond)(request)?;
        Ok(Completion {
            usage: LlmUsage {
                prompt_tokens: request.prompt.len().div_ceil(4) as u64,
                completion_tokens: text.len().div_ceil(4) as u64,
                latency_ms: 0,
                attempt: 1,
                chunk_ref: request.chunk_ref.clone(),
            },
            text,
            cached: false,
        })
    }
}
