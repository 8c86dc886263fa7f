//! Effective settings, layered flags > TOML file > environment > defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vqa_miner::curate::{CurationConfig, QuestionType};
use vqa_miner::gateway::LlmConfig;
use vqa_miner::pipeline::ExtractionConfig;
use vqa_miner::tags::ParseMode;

use crate::Failure;

pub const BASE_URL_ENV: &str = "VQAMINER_BASE_URL";
pub const MODEL_ENV: &str = "VQAMINER_MODEL";
pub const DEFAULT_CACHE_DIR: &str = ".vqa-miner-cache";

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub llm: LlmSection,
    pub chunking: ChunkingSection,
    pub curate: CurateSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
    pub request_timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub max_in_flight: Option<usize>,
    pub price_in: Option<f64>,
    pub price_out: Option<f64>,
    pub retry_base_delay_ms: Option<u64>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkingSection {
    pub window: Option<usize>,
    pub overlap: Option<usize>,
    pub strict: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurateSection {
    pub short_answer_budget: Option<usize>,
    pub incomplete_patterns: Option<Vec<String>>,
    pub kept_types: Option<Vec<QuestionType>>,
    pub too_easy_at: Option<f64>,
    pub too_hard_at: Option<f64>,
    pub skip_difficulty: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let raw = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        toml::from_str(&raw).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
    }
}

/// Values given on the command line; `None` means not given.
#[derive(Debug, Default)]
pub struct Overrides {
    pub window: Option<usize>,
    pub overlap: Option<usize>,
    pub model: Option<String>,
    pub base_url: Option<String>,
    pub prices: Option<(f64, f64)>,
    pub strict: bool,
    pub cache_dir: Option<PathBuf>,
    pub skip_difficulty: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub llm: LlmConfig,
    pub extraction: ExtractionConfig,
    pub curate: CurationConfig,
    pub cache_dir: PathBuf,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Settings {
    pub fn resolve(file: Option<&FileConfig>, env: impl Fn(&str) -> Option<String>, flags: &Overrides) -> Self {
        let mut llm = LlmConfig::default();
        let mut extraction = ExtractionConfig::default();
        let mut curate = CurationConfig::default();
        let mut cache_dir = PathBuf::from(DEFAULT_CACHE_DIR);

        set(&mut llm.base_url, env(BASE_URL_ENV).filter(|s| !s.is_empty()));
        set(&mut llm.model, env(MODEL_ENV).filter(|s| !s.is_empty()));

        if let Some(f) = file {
            let l = &f.llm;
            set(&mut llm.base_url, l.base_url.clone());
            set(&mut llm.model, l.model.clone());
            set(&mut llm.temperature, l.temperature);
            set(&mut llm.max_output_tokens, l.max_output_tokens);
            set(&mut llm.request_timeout_secs, l.request_timeout_secs);
            set(&mut llm.max_retries, l.max_retries);
            set(&mut llm.max_in_flight, l.max_in_flight);
            set(&mut llm.price_in, l.price_in);
            set(&mut llm.price_out, l.price_out);
            set(&mut llm.retry_base_delay_ms, l.retry_base_delay_ms);
            set(&mut cache_dir, l.cache_dir.clone());
            set(&mut extraction.window, f.chunking.window);
            set(&mut extraction.overlap, f.chunking.overlap);
            if f.chunking.strict == Some(true) {
                extraction.mode = ParseMode::Strict;
            }
            let c = &f.curate;
            set(&mut curate.short_answer_budget, c.short_answer_budget);
            set(&mut curate.incomplete_patterns, c.incomplete_patterns.clone());
            set(&mut curate.kept_types, c.kept_types.clone());
            set(&mut curate.too_easy_at, c.too_easy_at);
            set(&mut curate.too_hard_at, c.too_hard_at);
            set(&mut curate.skip_difficulty, c.skip_difficulty);
        }

        set(&mut extraction.window, flags.window);
        set(&mut extraction.overlap, flags.overlap);
        set(&mut llm.model, flags.model.clone());
        set(&mut llm.base_url, flags.base_url.clone());
        if let Some((pin, pout)) = flags.prices {
            llm.price_in = pin;
            llm.price_out = pout;
        }
        if flags.strict {
            extraction.mode = ParseMode::Strict;
        }
        set(&mut cache_dir, flags.cache_dir.clone());
        if flags.skip_difficulty {
            curate.skip_difficulty = true;
        }

        extraction.max_in_flight = llm.max_in_flight;
        curate.max_in_flight = llm.max_in_flight;
        Self {
            llm,
            extraction,
            curate,
            cache_dir,
        }
    }
}

/// `in,out` prices per 1M tokens.
pub fn parse_prices(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected IN,OUT")?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    let (a, b) = (num(a)?, num(b)?);
    if a < 0.0 || b < 0.0 {
        return Err("prices must be non-negative".into());
    }
    Ok((a, b))
}
