//! The LLM's tagged reply: `<chapter><title/><qa_pair>...</qa_pair></chapter>`
//! or `<empty></empty>`. See `docs/tag-grammar.md` for the grammar.

mod label;
mod parser;
mod render;
mod validate;

use serde::{Deserialize, Serialize};

use crate::ingest::BlockId;

pub use label::{normalize_label, roman_to_arabic};
pub use parser::{parse_response, ParseError, ParseMode, ParseOutcome};
pub use render::render_canonical;
pub use validate::{validate_ids, ValidatedResponse, ValidationError};

/// Chapter heading as returned by the model: block ids, or verbatim text
/// when the content is not an id list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Title {
    Ids(Vec<BlockId>),
    Text(String),
}

impl Title {
    pub fn blank() -> Self {
        Title::Ids(Vec::new())
    }

    pub fn is_blank(&self) -> bool {
        match self {
            Title::Ids(ids) => ids.is_empty(),
            Title::Text(t) => t.trim().is_empty(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chapter {
    pub title: Title,
    pub qa_pairs: Vec<RawQaPair>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawQaPair {
    /// Already passed through [`normalize_label`].
    pub label: String,
    pub question_ids: Vec<BlockId>,
    /// Verbatim short answer, not ids.
    pub answer_text: String,
    pub solution_ids: Vec<BlockId>,
}

impl RawQaPair {
    pub fn is_blank(&self) -> bool {
        self.question_ids.is_empty() && self.answer_text.is_empty() && self.solution_ids.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResponse {
    pub chapters: Vec<Chapter>,
}

impl ExtractionResponse {
    /// True for `<empty></empty>` and for anything with no chapters.
    pub fn is_empty(&self) -> bool {
        self.chapters.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.chapters.iter().map(|c| c.qa_pairs.len()).sum()
    }
}
