//! Mine aligned question/answer and visual-QA pairs out of layout-parsed
//! educational documents.
//!
//! The pipeline reads MinerU-style block JSON, hands id-bearing chunks to an
//! LLM that groups blocks, pairs questions with answers and places images,
//! then parses the tagged reply and swaps the ids back for the original
//! content:
//!
//! 1. [`ingest`]: load blocks, number them, cut overlapping chunks
//! 2. [`prompting`]: render the extraction prompt plus block payload
//! 3. [`gateway`]: OpenAI-compatible completion client with caching and cost accounting
//! 4. [`tags`]: recursive-descent parser for the `<chapter>/<qa_pair>` reply grammar
//! 5. [`reconstruct`]: id substitution, cross-document merge, overlap dedupe, Markdown/JSONL
//! 6. [`evaluate`]: precision/recall/F1 for text pairing and image placement
//! 7. [`curate`]: benchmark curation stages (short answers, question types, filters)
//! 8. [`review`]: HTTP backend for interactive manual review
//!
//! [`pipeline`] wires stages 1-5 together.

pub mod curate;
pub mod diagnostics;
pub mod evaluate;
pub mod gateway;
pub mod ingest;
pub mod manifest;
pub mod pipeline;
pub mod prompting;
pub mod reconstruct;
pub mod review;
pub mod tags;
mod util;

pub use diagnostics::{Diagnostic, DiagnosticKind};
pub use ingest::{BlockId, BlockKind, Chunk, ChunkRef, ContentBlock, DocumentSource};
pub use reconstruct::{QaPair, Segment};
