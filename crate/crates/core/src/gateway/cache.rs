use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{Completion, CompletionRequest, Gateway, GatewayError, LlmUsage};
use crate::util::{sha256_hex, write_atomic};

/// SHA-256 over prompt text, model and temperature.
pub fn cache_key(prompt: &str, model: &str, temperature: f64) -> String {
    sha256_hex(format!("{prompt}\u{1f}{model}\u{1f}{temperature}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model: String,
    pub temperature: f64,
    pub response: String,
    pub usage: LlmUsage,
}

/// One JSON file per response under a directory.
#[derive(Clone, Debug)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, GatewayError> {
        match std::fs::read_to_string(self.path_for(key)) {
            Ok(body) => serde_json::from_str(&body)
                .map(Some)
                .map_err(|e| GatewayError::Protocol(format!("corrupt cache entry {key}: {e}"))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn put(&self, entry: &CacheEntry) -> Result<(), GatewayError> {
        let body = serde_json::to_vec_pretty(entry).expect("cache entry serializes");
        write_atomic(&self.path_for(&entry.key), &body)?;
        Ok(())
    }
}

/// Serves responses from a [`ResponseCache`], falling through to an inner
/// gateway on a miss. With no inner gateway this is replay-only.
pub struct CachedGateway {
    inner: Option<Arc<dyn Gateway>>,
    cache: ResponseCache,
    model: String,
    temperature: f64,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl CachedGateway {
    pub fn new(inner: Arc<dyn Gateway>, cache: ResponseCache, model: &str, temperature: f64) -> Self {
        Self::build(Some(inner), cache, model, temperature)
    }

    pub fn replay_only(cache: ResponseCache, model: &str, temperature: f64) -> Self {
        Self::build(None, cache, model, temperature)
    }

    fn build(inner: Option<Arc<dyn Gateway>>, cache: ResponseCache, model: &str, temperature: f64) -> Self {
        Self {
            inner,
            cache,
            model: model.to_owned(),
            temperature,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn key_for(&self, prompt: &str) -> String {
        cache_key(prompt, &self.model, self.temperature)
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}

#[async_trait]
impl Gateway for CachedGateway {
    async fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        let key = self.key_for(&request.prompt);
        if let Some(entry) = self.cache.get(&key)? {
            self.hits.fetch_add(1, Ordering::Relaxed);
            let mut usage = entry.usage;
            usage.chunk_ref.clone_from(&request.chunk_ref);
            return Ok(Completion {
                text: entry.response,
                usage,
                cached: true,
            });
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let Some(inner) = &self.inner else {
            return Err(GatewayError::CacheMiss { key });
        };
        let completion = inner.complete(request).await?;
        self.cache.put(&CacheEntry {
            key,
            model: self.model.clone(),
            temperature: self.temperature,
            response: completion.text.clone(),
            usage: completion.usage.clone(),
        })?;
        Ok(completion)
    }
}
