//! Loading MinerU-style `content_list.json` output into ordered, numbered
//! content blocks, and cutting them into overlapping chunks.

mod chunk;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::diagnostics::{Diagnostic, DiagnosticKind};

pub use chunk::{chunk_document, Chunk, ChunkRef, DEFAULT_OVERLAP, DEFAULT_WINDOW};

/// Document-scoped block identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Text,
    Title,
    Equation,
    Table,
    Image,
}

impl BlockKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BlockKind::Text => "text",
            BlockKind::Title => "title",
            BlockKind::Equation => "equation",
            BlockKind::Table => "table",
            BlockKind::Image => "image",
        }
    }
}

/// Normalized bounding box, all coordinates in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    /// Accepts fractions, or MinerU's 0..1000 integer grid (rescaled).
    fn from_raw(raw: [f64; 4]) -> Option<Self> {
        let max = raw.iter().cloned().fold(f64::MIN, f64::max);
        let scale = if max <= 1.0 {
            1.0
        } else if max <= 1000.0 {
            1000.0
        } else {
            return None;
        };
        let [x0, y0, x1, y1] = raw.map(|v| v / scale);
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        (x0 < x1 && y0 < y1 && [x0, y0, x1, y1].into_iter().all(in_unit))
            .then_some(BBox { x0, y0, x1, y1 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentBlock {
    pub id: BlockId,
    pub kind: BlockKind,
    /// Markdown/LaTeX text; empty for images.
    pub text: String,
    /// Path relative to the source JSON's directory; set iff `kind == Image`.
    pub image_ref: Option<String>,
    pub page_index: u32,
    pub bbox: Option<BBox>,
    pub source_doc: String,
}

impl ContentBlock {
    pub fn is_image(&self) -> bool {
        self.kind == BlockKind::Image
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentSource {
    pub doc_id: String,
    pub path: PathBuf,
    pub subject: String,
    pub blocks: Vec<ContentBlock>,
}

impl DocumentSource {
    pub fn block(&self, id: BlockId) -> Option<&ContentBlock> {
        // ids are dense after assign_identifiers; fall back to a scan otherwise.
        match self.blocks.get(id.0 as usize) {
            Some(b) if b.id == id => Some(b),
            _ => self.blocks.iter().find(|b| b.id == id),
        }
    }

    /// Directory that `image_ref` paths resolve against.
    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or_else(|| Path::new("."))
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input {path}: {reason}")]
    MalformedInput { path: PathBuf, reason: String },
    #[error("document {doc_id} has no usable blocks")]
    EmptyDocument { doc_id: String },
    #[error("invalid chunk parameters: window={window}, overlap={overlap} (need window >= 2*overlap + 1)")]
    InvalidChunkParams { window: usize, overlap: usize },
}

/// Load one MinerU block file. Warnings are logged and dropped; use
/// [`load_with_diagnostics`] to keep them.
pub fn load_mineru_document(
    path: impl AsRef<Path>,
    doc_id: &str,
    subject: &str,
) -> Result<DocumentSource, IngestError> {
    let (doc, warnings) = load_with_diagnostics(path, doc_id, subject)?;
    for w in &warnings {
        tracing::warn!(doc_id, kind = ?w.kind, "{}", w.message);
    }
    Ok(doc)
}

pub fn load_with_diagnostics(
    path: impl AsRef<Path>,
    doc_id: &str,
    subject: &str,
) -> Result<(DocumentSource, Vec<Diagnostic>), IngestError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: Value = serde_json::from_str(&raw).map_err(|e| IngestError::MalformedInput {
        path: path.to_path_buf(),
        reason: format!("not JSON: {e}"),
    })?;
    let Value::Array(records) = value else {
        return Err(IngestError::MalformedInput {
            path: path.to_path_buf(),
            reason: "top-level value is not an array".into(),
        });
    };

    let mut warnings = Vec::new();
    let mut blocks = Vec::with_capacity(records.len());
    let mut last_page = 0u32;
    for (index, record) in records.iter().enumerate() {
        let Some(parsed) = parse_record(record, index, &mut warnings) else {
            continue;
        };
        let (kind, text, image_ref, page_index, bbox) = parsed;
        if page_index < last_page {
            warnings.push(Diagnostic::new(
                DiagnosticKind::PageOrder,
                format!("record {index}: page_idx {page_index} after page {last_page}"),
            ));
        }
        last_page = last_page.max(page_index);
        blocks.push(ContentBlock {
            id: BlockId(blocks.len() as u32),
            kind,
            text,
            image_ref,
            page_index,
            bbox,
            source_doc: doc_id.to_owned(),
        });
    }

    if blocks.is_empty() {
        return Err(IngestError::EmptyDocument {
            doc_id: doc_id.to_owned(),
        });
    }
    Ok((
        DocumentSource {
            doc_id: doc_id.to_owned(),
            path: path.to_path_buf(),
            subject: subject.to_owned(),
            blocks,
        },
        warnings,
    ))
}

type ParsedRecord = (BlockKind, String, Option<String>, u32, Option<BBox>);

fn parse_record(record: &Value, index: usize, warnings: &mut Vec<Diagnostic>) -> Option<ParsedRecord> {
    let skip = |warnings: &mut Vec<Diagnostic>, why: &str| {
        warnings.push(Diagnostic::new(
            DiagnosticKind::SkippedRecord,
            format!("record {index}: {why}"),
        ));
        None
    };
    let Some(obj) = record.as_object() else {
        return skip(warnings, "not an object");
    };
    let Some(type_name) = obj.get("type").and_then(Value::as_str) else {
        return skip(warnings, "missing \"type\"");
    };
    let text = obj
        .get("text")
        .and_then(Value::as_str)
        .or_else(|| obj.get("table_body").and_then(Value::as_str))
        .map(str::to_owned);
    let img_path = obj
        .get("img_path")
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .map(str::to_owned);

    let mut kind = match type_name {
        "text" => BlockKind::Text,
        "title" => BlockKind::Title,
        "equation" | "interline_equation" => BlockKind::Equation,
        "table" => BlockKind::Table,
        "image" => BlockKind::Image,
        other => {
            warnings.push(Diagnostic::new(
                DiagnosticKind::UnknownBlockKind,
                format!("record {index}: unknown type {other:?}, treated as text"),
            ));
            BlockKind::Text
        }
    };
    // A table with only a rendered image is kept as an image block.
    if kind == BlockKind::Table && text.is_none() && img_path.is_some() {
        kind = BlockKind::Image;
    }

    let (text, image_ref) = if kind == BlockKind::Image {
        match img_path {
            Some(p) => (String::new(), Some(p)),
            None => return skip(warnings, "image without img_path"),
        }
    } else {
        match text {
            Some(t) => (t, None),
            None => return skip(warnings, "no \"text\""),
        }
    };

    let page_index = obj
        .get("page_idx")
        .and_then(Value::as_u64)
        .map(|p| p as u32)
        .unwrap_or(0);

    let bbox = match obj.get("bbox") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let coords: Option<Vec<f64>> = v
                .as_array()
                .map(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
                .unwrap_or(None);
            let bbox = coords
                .filter(|c| c.len() == 4)
                .and_then(|c| BBox::from_raw([c[0], c[1], c[2], c[3]]));
            if bbox.is_none() {
                warnings.push(Diagnostic::new(
                    DiagnosticKind::InvalidBbox,
                    format!("record {index}: bbox {v} dropped"),
                ));
            }
            bbox
        }
    };
    Some((kind, text, image_ref, page_index, bbox))
}

/// Renumber blocks `0..N` in reading order.
pub fn assign_identifiers(mut doc: DocumentSource) -> DocumentSource {
    for (i, block) in doc.blocks.iter_mut().enumerate() {
        block.id = BlockId(i as u32);
        block.source_doc.clone_from(&doc.doc_id);
    }
    doc
}

/// `content_list.json` style names lose their suffix: `book_content_list.json` -> `book`.
pub fn doc_id_from_path(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match stem.strip_suffix("_content_list") {
        Some(s) if !s.is_empty() => s.to_owned(),
        _ if stem == "content_list" => path
            .parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or(stem),
        _ => stem,
    }
}
