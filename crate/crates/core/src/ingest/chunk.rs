use serde::{Deserialize, Serialize};

use super::{BlockId, DocumentSource, IngestError};

pub const DEFAULT_WINDOW: usize = 80;
pub const DEFAULT_OVERLAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChunkRef {
    pub doc_id: String,
    pub chunk_index: usize,
}

/// A window of consecutive blocks sent to the LLM in one request.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_index: usize,
    pub doc_id: String,
    pub block_ids: Vec<BlockId>,
    /// Leading ids shared with the previous chunk.
    pub overlap_prefix_len: usize,
}

impl Chunk {
    pub fn chunk_ref(&self) -> ChunkRef {
        ChunkRef {
            doc_id: self.doc_id.clone(),
            chunk_index: self.chunk_index,
        }
    }

    pub fn contains(&self, id: BlockId) -> bool {
        // block_ids are consecutive
        match (self.block_ids.first(), self.block_ids.last()) {
            (Some(lo), Some(hi)) => *lo <= id && id <= *hi,
            _ => false,
        }
    }

    /// Ids this chunk contributes beyond its shared prefix.
    pub fn fresh_ids(&self) -> &[BlockId] {
        &self.block_ids[self.overlap_prefix_len..]
    }
}

/// Sliding window over the document's blocks.
///
/// Each chunk starts `window - overlap` blocks after the previous one. When
/// the block just before the next start is an image, or (with zero overlap) the
/// first block of the next chunk is one, the next chunk starts one block
/// earlier so an image never ends up split from its neighbour.
pub fn chunk_document(
    doc: &DocumentSource,
    window: usize,
    overlap: usize,
) -> Result<Vec<Chunk>, IngestError> {
    if window < 2 * overlap + 1 {
        return Err(IngestError::InvalidChunkParams { window, overlap });
    }
    let n = doc.blocks.len();
    let is_image = |i: usize| doc.blocks[i].is_image();

    let mut chunks = Vec::new();
    let mut start = 0usize;
    let mut prefix = 0usize;
    loop {
        let end = (start + window).min(n);
        chunks.push(Chunk {
            chunk_index: chunks.len(),
            doc_id: doc.doc_id.clone(),
            block_ids: doc.blocks[start..end].iter().map(|b| b.id).collect(),
            overlap_prefix_len: prefix,
        });
        if end >= n {
            break;
        }
        let mut next = end - overlap;
        let image_at_seam =
            is_image(next - 1) || (next == end && is_image(end));
        if image_at_seam && next - 1 > start {
            next -= 1;
        }
        prefix = end - next;
        start = next;
    }
    Ok(chunks)
}
