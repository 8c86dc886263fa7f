//! Per-run record of what was sent, what came back, and what it cost.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gateway::LlmUsage;
use crate::util::write_atomic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkStatus {
    Ok,
    /// Lenient parse produced nothing usable.
    Unparsed,
    GatewayFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub doc_id: String,
    pub chunk_index: usize,
    pub first_block: u32,
    pub last_block: u32,
    pub status: ChunkStatus,
    pub cached: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<LlmUsage>,
    pub pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptInfo {
    pub name: String,
    pub sha256: String,
    pub role: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub doc_id: String,
    pub path: String,
    pub blocks: usize,
    pub chunks: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub requests: usize,
    pub cache_hits: usize,
    pub failed_chunks: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub pairs: usize,
    pub questions: usize,
    pub cost_usd: f64,
    pub cost_per_question: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Effective configuration after flag/file/env layering.
    pub config: serde_json::Value,
    pub prompt: PromptInfo,
    pub inputs: Vec<InputRecord>,
    pub chunks: Vec<ChunkRecord>,
    pub totals: Totals,
}

impl RunManifest {
    pub fn new_run_id(started: chrono::DateTime<chrono::Utc>) -> String {
        format!("run-{}", started.timestamp_millis())
    }

    pub fn timestamp(t: chrono::DateTime<chrono::Utc>) -> String {
        t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
    }

    pub fn usages(&self) -> Vec<LlmUsage> {
        self.chunks.iter().filter_map(|c| c.usage.clone()).collect()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut body = serde_json::to_string_pretty(self).expect("manifest serializes");
        body.push('\n');
        write_atomic(path, body.as_bytes())
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}
