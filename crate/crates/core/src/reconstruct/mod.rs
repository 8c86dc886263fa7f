//! Turn validated id-level replies back into content: substitute block
//! text and images, join question-only and answer-only halves, collapse
//! overlap duplicates, and write JSONL and Markdown.

mod merge;
mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::{BlockId, BlockKind, DocumentSource};
use crate::tags::{Title, ValidatedResponse};

pub use merge::{dedupe_overlaps, disambiguate_labels, merge_cross_source, MatchPolicy};
pub use render::{
    export_jsonl, load_jsonl, render_document_markdown, render_markdown, write_markdown_bundle,
    ExportError,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Segment {
    Text(String),
    /// Path relative to the source document's directory.
    Image(String),
}

impl Segment {
    pub fn is_image(&self) -> bool {
        matches!(self, Segment::Image(_))
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Segment::Text(t) => Some(t),
            Segment::Image(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    TextOnly,
    TextImage,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockRef {
    pub doc_id: String,
    pub id: BlockId,
}

/// Every block a chunk's reply cited for this pair.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceRef {
    pub doc_id: String,
    pub chunk_index: usize,
    pub block_ids: Vec<BlockId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<SourceRef>,
    /// One entry per question segment, same order.
    pub question_blocks: Vec<BlockRef>,
    /// One entry per solution segment, same order.
    pub solution_blocks: Vec<BlockRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub title_blocks: Vec<BlockRef>,
}

impl Provenance {
    /// Union `other.sources` into `self.sources`, keeping them sorted.
    pub(crate) fn absorb_sources(&mut self, other: &Provenance) {
        let mut by_chunk: BTreeMap<(String, usize), Vec<BlockId>> = BTreeMap::new();
        for s in self.sources.iter().chain(&other.sources) {
            by_chunk
                .entry((s.doc_id.clone(), s.chunk_index))
                .or_default()
                .extend(&s.block_ids);
        }
        self.sources = by_chunk
            .into_iter()
            .map(|((doc_id, chunk_index), mut block_ids)| {
                block_ids.sort();
                block_ids.dedup();
                SourceRef {
                    doc_id,
                    chunk_index,
                    block_ids,
                }
            })
            .collect();
    }
}

/// A reconstructed question with its short answer and worked solution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub chapter: String,
    pub label: String,
    pub question: Vec<Segment>,
    pub answer: String,
    pub solution: Vec<Segment>,
    pub modality: Modality,
    /// Set when only one half was ever found.
    pub partial: bool,
    pub provenance: Provenance,
}

impl QaPair {
    pub fn is_question_only(&self) -> bool {
        !self.question.is_empty() && self.answer.is_empty() && self.solution.is_empty()
    }

    pub fn is_answer_only(&self) -> bool {
        self.question.is_empty() && (!self.answer.is_empty() || !self.solution.is_empty())
    }

    /// Document the pair belongs to: where its question is, else where its
    /// solution is.
    pub fn doc_id(&self) -> &str {
        let p = &self.provenance;
        p.question_blocks
            .first()
            .or(p.solution_blocks.first())
            .map(|b| b.doc_id.as_str())
            .or(p.sources.first().map(|s| s.doc_id.as_str()))
            .unwrap_or("")
    }

    pub fn question_text(&self) -> String {
        segments_text(&self.question)
    }

    pub fn solution_text(&self) -> String {
        segments_text(&self.solution)
    }

    /// Text characters plus one per image.
    pub fn solution_len(&self) -> usize {
        self.solution
            .iter()
            .map(|s| match s {
                Segment::Text(t) => t.chars().count(),
                Segment::Image(_) => 1,
            })
            .sum()
    }

    pub(crate) fn refresh_modality(&mut self) {
        let has_image = self.question.iter().chain(&self.solution).any(Segment::is_image);
        self.modality = if has_image {
            Modality::TextImage
        } else {
            Modality::TextOnly
        };
    }

    /// `(image_ref, block)` for every image, question slot first.
    pub fn images(&self) -> impl Iterator<Item = (&str, &'static str, Option<&BlockRef>)> {
        let q = self
            .question
            .iter()
            .enumerate()
            .map(|(i, s)| (s, "question", self.provenance.question_blocks.get(i)));
        let sol = self
            .solution
            .iter()
            .enumerate()
            .map(|(i, s)| (s, "solution", self.provenance.solution_blocks.get(i)));
        q.chain(sol).filter_map(|(s, slot, b)| match s {
            Segment::Image(r) => Some((r.as_str(), slot, b)),
            Segment::Text(_) => None,
        })
    }
}

fn segments_text(segments: &[Segment]) -> String {
    segments
        .iter()
        .map(|s| match s {
            Segment::Text(t) => t.as_str(),
            Segment::Image(_) => "[image]",
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn segment_of(doc: &DocumentSource, id: BlockId) -> Option<Segment> {
    let block = doc.block(id)?;
    Some(match (&block.kind, &block.image_ref) {
        (BlockKind::Image, Some(r)) => Segment::Image(r.clone()),
        _ => Segment::Text(block.text.clone()),
    })
}

fn resolve(doc: &DocumentSource, ids: &[BlockId]) -> (Vec<Segment>, Vec<BlockRef>) {
    ids.iter()
        .filter_map(|&id| {
            segment_of(doc, id).map(|s| {
                (
                    s,
                    BlockRef {
                        doc_id: doc.doc_id.clone(),
                        id,
                    },
                )
            })
        })
        .unzip()
}

/// Swap ids for block content. The chapter comes from the title blocks'
/// text joined by single spaces, or verbatim when the model wrote text.
pub fn substitute(v: &ValidatedResponse, doc: &DocumentSource) -> Vec<QaPair> {
    let mut out = Vec::new();
    for chapter in &v.chapters {
        let (title, title_blocks) = match &chapter.title {
            Title::Ids(ids) => {
                let (segments, refs) = resolve(doc, ids);
                let texts: Vec<&str> = segments
                    .iter()
                    .filter_map(Segment::text)
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .collect();
                (texts.join(" "), refs)
            }
            Title::Text(t) => (t.trim().to_owned(), Vec::new()),
        };
        for raw in &chapter.qa_pairs {
            let (question, question_blocks) = resolve(doc, &raw.question_ids);
            let (solution, solution_blocks) = resolve(doc, &raw.solution_ids);
            let mut block_ids: Vec<BlockId> = raw
                .question_ids
                .iter()
                .chain(&raw.solution_ids)
                .copied()
                .collect();
            block_ids.sort();
            block_ids.dedup();
            let mut pair = QaPair {
                chapter: title.clone(),
                label: raw.label.clone(),
                question,
                answer: raw.answer_text.clone(),
                solution,
                modality: Modality::TextOnly,
                partial: false,
                provenance: Provenance {
                    sources: vec![SourceRef {
                        doc_id: v.chunk_ref.doc_id.clone(),
                        chunk_index: v.chunk_ref.chunk_index,
                        block_ids,
                    }],
                    question_blocks,
                    solution_blocks,
                    title_blocks: title_blocks.clone(),
                },
            };
            pair.partial = pair.is_question_only() || pair.is_answer_only();
            pair.refresh_modality();
            out.push(pair);
        }
    }
    out
}
