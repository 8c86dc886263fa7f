//! Ingested documents in, reconstructed pairs out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{Diagnostic, DiagnosticKind};
use crate::gateway::{complete_all, CompletionRequest, Gateway, GatewayError, LlmUsage};
use crate::ingest::{chunk_document, BlockId, Chunk, ChunkRef, DocumentSource, IngestError, DEFAULT_OVERLAP, DEFAULT_WINDOW};
use crate::manifest::{ChunkRecord, ChunkStatus};
use crate::prompting::{build_extraction_prompt, PromptError, PromptTemplate};
use crate::reconstruct::{dedupe_overlaps, disambiguate_labels, merge_cross_source, substitute, MatchPolicy, QaPair};
use crate::tags::{parse_response, validate_ids, ParseError, ParseMode, Title, ValidatedResponse, ValidationError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub window: usize,
    pub overlap: usize,
    pub mode: ParseMode,
    pub match_policy: MatchPolicy,
    pub max_in_flight: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            overlap: DEFAULT_OVERLAP,
            mode: ParseMode::Lenient,
            match_policy: MatchPolicy::ChapterAndLabel,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("{}#{}: {source}", chunk.doc_id, chunk.chunk_index)]
    Parse {
        chunk: ChunkRef,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub pairs: Vec<QaPair>,
    pub diagnostics: Vec<Diagnostic>,
    pub chunks: Vec<ChunkRecord>,
    pub chunk_counts: Vec<usize>,
}

impl Extraction {
    pub fn usages(&self) -> Vec<LlmUsage> {
        self.chunks.iter().filter_map(|c| c.usage.clone()).collect()
    }

    pub fn failed_chunks(&self) -> usize {
        self.chunks.iter().filter(|c| c.status == ChunkStatus::GatewayFailed).count()
    }

    /// Pairs that carry a question.
    pub fn question_count(&self) -> usize {
        self.pairs.iter().filter(|p| !p.question.is_empty()).count()
    }
}

/// Chapter titles seen so far in one document.
#[derive(Default)]
struct TitleTrail {
    /// Id-bearing titles keyed by their first block.
    by_position: Vec<(BlockId, Title)>,
    last: Option<Title>,
}

impl TitleTrail {
    /// Title in effect just before `id`.
    fn before(&self, id: BlockId) -> Option<&Title> {
        self.by_position
            .iter()
            .filter(|(at, _)| *at < id)
            .max_by_key(|(at, _)| *at)
            .map(|(_, t)| t)
            .or(self.last.as_ref())
    }

    fn record(&mut self, title: &Title) {
        if title.is_blank() {
            return;
        }
        if let Title::Ids(ids) = title {
            if let Some(&first) = ids.iter().min() {
                self.by_position.push((first, title.clone()));
            }
        }
        self.last = Some(title.clone());
    }
}

/// A chunk that opens mid-chapter has no title block in view and comes back
/// with a blank first title; give it the title in effect at its first block.
fn carry_title(v: &mut ValidatedResponse, trail: &mut TitleTrail) -> Option<Diagnostic> {
    let mut note = None;
    if let Some(first) = v.chapters.first_mut() {
        let earliest = first
            .qa_pairs
            .iter()
            .flat_map(|p| p.question_ids.iter().chain(&p.solution_ids))
            .min()
            .copied();
        if first.title.is_blank() && !first.qa_pairs.is_empty() {
            if let Some(prev) = earliest.and_then(|id| trail.before(id)).or(trail.last.as_ref()) {
                first.title = prev.clone();
                note = Some(
                    Diagnostic::new(DiagnosticKind::TitleCarryOver, "blank first chapter title taken from an earlier chunk")
                        .in_chunk(v.chunk_ref.clone()),
                );
            }
        }
    }
    for c in &v.chapters {
        trail.record(&c.title);
    }
    note
}

fn record(chunk: &Chunk, status: ChunkStatus, cached: bool, usage: Option<LlmUsage>, pairs: usize, error: Option<String>) -> ChunkRecord {
    ChunkRecord {
        doc_id: chunk.doc_id.clone(),
        chunk_index: chunk.chunk_index,
        first_block: chunk.block_ids.first().map_or(0, |b| b.0),
        last_block: chunk.block_ids.last().map_or(0, |b| b.0),
        status,
        cached,
        usage,
        pairs,
        error,
    }
}

/// Chunk, prompt, complete, parse, validate and substitute every document,
/// then join halves and drop overlap duplicates. Gateway failures are
/// recorded per chunk and the run continues; in strict mode the first parse
/// or validation error aborts.
pub async fn run_extraction(
    docs: &[DocumentSource],
    template: &PromptTemplate,
    gateway: &dyn Gateway,
    cfg: &ExtractionConfig,
) -> Result<Extraction, PipelineError> {
    let mut plan: Vec<(usize, Chunk)> = Vec::new();
    let mut requests = Vec::new();
    let mut chunk_counts = Vec::with_capacity(docs.len());
    for (d, doc) in docs.iter().enumerate() {
        let chunks = chunk_document(doc, cfg.window, cfg.overlap)?;
        chunk_counts.push(chunks.len());
        for chunk in chunks {
            let bundle = build_extraction_prompt(&chunk, doc, &doc.subject, template)?;
            requests.push(CompletionRequest::for_chunk(bundle.text, bundle.chunk_ref));
            plan.push((d, chunk));
        }
    }

    let results = complete_all(gateway, &requests, cfg.max_in_flight).await;

    let mut diagnostics = Vec::new();
    let mut records = Vec::with_capacity(plan.len());
    let mut partials = Vec::new();
    let mut trail: Option<(usize, TitleTrail)> = None;
    for ((d, chunk), result) in plan.iter().zip(results) {
        let doc = &docs[*d];
        if trail.as_ref().map(|(i, _)| i) != Some(d) {
            trail = Some((*d, TitleTrail::default()));
        }
        let carried = &mut trail.as_mut().expect("set above").1;
        let completion = match result {
            Ok(c) => c,
            Err(e) => {
                let usage = match &e {
                    GatewayError::Transport { usage, .. } => usage.clone(),
                    _ => None,
                };
                diagnostics.push(
                    Diagnostic::new(DiagnosticKind::GatewayFailure, e.to_string()).in_chunk(chunk.chunk_ref()),
                );
                records.push(record(chunk, ChunkStatus::GatewayFailed, false, usage, 0, Some(e.to_string())));
                continue;
            }
        };

        let outcome = parse_response(&completion.text, cfg.mode).map_err(|source| PipelineError::Parse {
            chunk: chunk.chunk_ref(),
            source,
        })?;
        diagnostics.extend(outcome.diagnostics.into_iter().map(|d| d.in_chunk(chunk.chunk_ref())));
        let unparsed = outcome.response.is_empty() && !completion.text.contains("<empty>");

        let mut validated = validate_ids(&outcome.response, chunk, cfg.mode)?;
        diagnostics.append(&mut validated.diagnostics);
        diagnostics.extend(carry_title(&mut validated, carried));

        let pairs = substitute(&validated, doc);
        let status = if unparsed { ChunkStatus::Unparsed } else { ChunkStatus::Ok };
        records.push(record(chunk, status, completion.cached, Some(completion.usage), pairs.len(), None));
        partials.extend(pairs);
    }

    let pairs = dedupe_overlaps(partials);
    let (pairs, mut merge_notes) = merge_cross_source(pairs, cfg.match_policy);
    diagnostics.append(&mut merge_notes);
    let mut pairs = dedupe_overlaps(pairs);
    diagnostics.extend(disambiguate_labels(&mut pairs));

    Ok(Extraction {
        pairs,
        diagnostics,
        chunks: records,
        chunk_counts,
    })
}
