use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Chapter, ExtractionResponse, ParseMode, RawQaPair, Title};
use crate::diagnostics::{Diagnostic, DiagnosticKind};
use crate::ingest::{BlockId, Chunk, ChunkRef};

/// A parsed reply whose ids are all known to belong to its chunk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatedResponse {
    pub chunk_ref: ChunkRef,
    pub chapters: Vec<Chapter>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("{field} of pair {label:?} references block {id}, outside chunk {chunk_index} of {doc_id}")]
    OutOfChunk {
        doc_id: String,
        chunk_index: usize,
        label: String,
        field: &'static str,
        id: BlockId,
    },
}

struct Checker<'a> {
    chunk: &'a Chunk,
    strict: bool,
    diagnostics: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn clean(&mut self, ids: &[BlockId], field: &'static str, label: &str) -> Result<Vec<BlockId>, ValidationError> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            if !self.chunk.contains(id) {
                if self.strict {
                    return Err(ValidationError::OutOfChunk {
                        doc_id: self.chunk.doc_id.clone(),
                        chunk_index: self.chunk.chunk_index,
                        label: label.to_owned(),
                        field,
                        id,
                    });
                }
                self.note(DiagnosticKind::OutOfChunkId, format!("{field} of {label:?}: dropped block {id}"));
                continue;
            }
            if !seen.insert(id) {
                self.note(DiagnosticKind::DuplicateId, format!("{field} of {label:?}: repeated block {id}"));
                continue;
            }
            out.push(id);
        }
        Ok(out)
    }

    fn note(&mut self, kind: DiagnosticKind, message: String) {
        self.diagnostics
            .push(Diagnostic::new(kind, message).in_chunk(self.chunk.chunk_ref()));
    }
}

/// Drop (or, strict, reject) ids outside the chunk, dedupe ids within a
/// field, and discard pairs left with nothing in them.
pub fn validate_ids(
    resp: &ExtractionResponse,
    chunk: &Chunk,
    mode: ParseMode,
) -> Result<ValidatedResponse, ValidationError> {
    let mut checker = Checker {
        chunk,
        strict: mode == ParseMode::Strict,
        diagnostics: Vec::new(),
    };
    let mut chapters = Vec::with_capacity(resp.chapters.len());
    for chapter in &resp.chapters {
        let title = match &chapter.title {
            Title::Ids(ids) => Title::Ids(checker.clean(ids, "title", "")?),
            Title::Text(t) => Title::Text(t.clone()),
        };
        let mut qa_pairs = Vec::with_capacity(chapter.qa_pairs.len());
        for pair in &chapter.qa_pairs {
            let cleaned = RawQaPair {
                label: pair.label.clone(),
                question_ids: checker.clean(&pair.question_ids, "question", &pair.label)?,
                answer_text: pair.answer_text.clone(),
                solution_ids: checker.clean(&pair.solution_ids, "solution", &pair.label)?,
            };
            if cleaned.is_blank() {
                checker.note(
                    DiagnosticKind::DiscardedPair,
                    format!("pair {:?} has no question, answer or solution left", pair.label),
                );
                continue;
            }
            qa_pairs.push(cleaned);
        }
        chapters.push(Chapter { title, qa_pairs });
    }
    Ok(ValidatedResponse {
        chunk_ref: chunk.chunk_ref(),
        chapters,
        diagnostics: checker.diagnostics,
    })
}
