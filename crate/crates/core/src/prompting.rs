//! Extraction prompt rendering and the id-bearing block payload the LLM reads.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BlockId, BlockKind, Chunk, ChunkRef, DocumentSource};
use crate::util::sha256_hex;

const EXTRACT_VQA: &str = include_str!("../prompts/extract_vqa.txt");

/// Role the prompt is sent under; recorded in run manifests.
pub const PROMPT_ROLE: &str = "user";

const SUBJECT_SLOT: &str = "{subject}";
const CAPTION_HINT_MAX_CHARS: usize = 160;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template {name} must contain {slot} exactly once, found {found}")]
    BadTemplate {
        name: String,
        slot: String,
        found: usize,
    },
    #[error("chunk {chunk_index} of {doc_id} references unknown block {id}")]
    DanglingId {
        doc_id: String,
        chunk_index: usize,
        id: BlockId,
    },
    #[error("subject must not be empty")]
    EmptySubject,
}

/// A prompt text resource plus its content hash.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    text: String,
    sha256: String,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let sha256 = sha256_hex(&text);
        Self {
            name: name.into(),
            text,
            sha256,
        }
    }

    /// The extraction template compiled into the binary.
    pub fn builtin_extraction() -> Self {
        Self::new("extract_vqa.txt", EXTRACT_VQA)
    }

    /// Load an extraction template from disk, checking the subject slot.
    pub fn load_extraction(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let t = Self::load(path)?;
        t.require_slots(&[SUBJECT_SLOT])?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PromptError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok(Self::new(name, text))
    }

    pub(crate) fn require_slots(&self, slots: &[&str]) -> Result<(), PromptError> {
        for slot in slots {
            let found = self.text.matches(slot).count();
            if found != 1 {
                return Err(PromptError::BadTemplate {
                    name: self.name.clone(),
                    slot: (*slot).to_owned(),
                    found,
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    /// Replace each `{key}` with its value. Values are not re-scanned.
    pub fn fill(&self, vars: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text.as_str();
        'outer: while let Some(open) = rest.find('{') {
            for (key, value) in vars {
                let slot_len = key.len() + 2;
                if rest[open..].len() >= slot_len
                    && rest[open + 1..].starts_with(key)
                    && rest[open + 1 + key.len()..].starts_with('}')
                {
                    out.push_str(&rest[..open]);
                    out.push_str(value);
                    rest = &rest[open + slot_len..];
                    continue 'outer;
                }
            }
            out.push_str(&rest[..=open]);
            rest = &rest[open + 1..];
        }
        out.push_str(rest);
        out
    }
}

/// The filled prompt for one chunk.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    /// Full message text: filled template, blank line, payload.
    pub text: String,
    pub payload: String,
    pub chunk_ref: ChunkRef,
}

#[derive(Serialize)]
struct PayloadRecord<'a> {
    id: u32,
    #[serde(rename = "type")]
    kind: &'a str,
    content: String,
}

/// Serialize the chunk's blocks as a JSON array, one record per line.
pub fn serialize_blocks(chunk: &Chunk, doc: &DocumentSource) -> Result<String, PromptError> {
    let mut lines = Vec::with_capacity(chunk.block_ids.len());
    for &id in &chunk.block_ids {
        let block = doc.block(id).ok_or_else(|| PromptError::DanglingId {
            doc_id: chunk.doc_id.clone(),
            chunk_index: chunk.chunk_index,
            id,
        })?;
        let content = if block.is_image() {
            match caption_hint(doc, id) {
                Some(caption) => format!("[image] {caption}"),
                None => "[image]".to_owned(),
            }
        } else {
            block.text.clone()
        };
        let record = PayloadRecord {
            id: id.0,
            kind: block.kind.as_str(),
            content,
        };
        lines.push(serde_json::to_string(&record).expect("payload record serializes"));
    }
    Ok(format!("[\n{}\n]", lines.join(",\n")))
}

/// Caption-looking text in the block right after (preferred) or before the image.
fn caption_hint(doc: &DocumentSource, id: BlockId) -> Option<String> {
    let pos = doc.blocks.iter().position(|b| b.id == id)?;
    let after = doc.blocks.get(pos + 1);
    let before = pos.checked_sub(1).and_then(|p| doc.blocks.get(p));
    [after, before]
        .into_iter()
        .flatten()
        .filter(|b| matches!(b.kind, BlockKind::Text | BlockKind::Title))
        .map(|b| b.text.trim())
        .find(|t| looks_like_caption(t))
        .map(|t| t.chars().take(CAPTION_HINT_MAX_CHARS).collect())
}

fn looks_like_caption(text: &str) -> bool {
    const MARKERS: [&str; 8] = ["fig", "figure", "diagram", "table", "chart", "图", "表", "如图"];
    let lower = text.to_lowercase();
    !text.is_empty() && text.chars().count() <= 300 && MARKERS.iter().any(|m| lower.starts_with(m))
}

pub fn build_extraction_prompt(
    chunk: &Chunk,
    doc: &DocumentSource,
    subject: &str,
    template: &PromptTemplate,
) -> Result<PromptBundle, PromptError> {
    let subject = subject.trim();
    if subject.is_empty() {
        return Err(PromptError::EmptySubject);
    }
    let payload = serialize_blocks(chunk, doc)?;
    let filled = template.fill(&[("subject", subject)]);
    let text = format!("{}\n\n{}", filled.trim_end(), payload);
    Ok(PromptBundle {
        text,
        payload,
        chunk_ref: chunk.chunk_ref(),
    })
}
