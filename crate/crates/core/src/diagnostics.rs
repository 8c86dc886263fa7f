//! Structured, serializable diagnostics shared by every stage.

use serde::{Deserialize, Serialize};

use crate::ingest::ChunkRef;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    UnknownBlockKind,
    SkippedRecord,
    InvalidBbox,
    PageOrder,
    UnexpectedText,
    UnterminatedTag,
    MalformedPair,
    NonCanonical,
    InvalidId,
    OutOfChunkId,
    DuplicateId,
    DiscardedPair,
    TitleCarryOver,
    AmbiguousMerge,
    DuplicateLabel,
    GatewayFailure,
    MissingAsset,
    AssetCollision,
    UnrecognizedReply,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chunk_ref: Option<ChunkRef>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub offset: Option<usize>,
    pub kind: DiagnosticKind,
    pub message: String,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub snippet: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, message: impl Into<String>) -> Self {
        Self {
            chunk_ref: None,
            offset: None,
            kind,
            message: message.into(),
            snippet: String::new(),
        }
    }

    pub fn at(mut self, offset: usize) -> Self {
        self.offset = Some(offset);
        self
    }

    pub fn with_snippet(mut self, snippet: impl Into<String>) -> Self {
        self.snippet = snippet.into();
        self
    }

    pub fn in_chunk(mut self, chunk_ref: ChunkRef) -> Self {
        self.chunk_ref = Some(chunk_ref);
        self
    }
}

/// Short excerpt of `src` starting at `offset`, safe on char boundaries.
pub(crate) fn snippet_at(src: &str, offset: usize) -> String {
    let mut start = offset.min(src.len());
    while !src.is_char_boundary(start) {
        start -= 1;
    }
    src[start..].chars().take(40).collect()
}
