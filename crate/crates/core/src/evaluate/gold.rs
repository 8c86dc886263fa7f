use std::collections::{BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{pair_key, PairKey};
use crate::ingest::BlockId;
use crate::reconstruct::BlockRef;

#[derive(Debug, Error)]
pub enum GoldError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Question,
    Answer,
    Solution,
}

/// Table metadata for one document.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldDocument {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
}

/// A block reference in a gold file: `{"doc_id", "id"}`, or a bare id in
/// the owning pair's document.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GoldBlock {
    Ref(BlockRef),
    Id(BlockId),
}

impl GoldBlock {
    fn resolve(&self, doc_id: &str) -> BlockRef {
        match self {
            GoldBlock::Ref(r) => r.clone(),
            GoldBlock::Id(id) => BlockRef {
                doc_id: doc_id.to_owned(),
                id: *id,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldPair {
    /// May be omitted when the annotation covers a single document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    pub chapter: String,
    pub label: String,
    /// Text blocks only; images are scored as placements.
    #[serde(default)]
    pub question_block_ids: Vec<GoldBlock>,
    #[serde(default)]
    pub solution_block_ids: Vec<GoldBlock>,
    #[serde(default)]
    pub answer: String,
    /// A reviewer judged the extracted pair wrong: the true pair exists but
    /// is not described here. Counts as a miss.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rejected: bool,
}

impl GoldPair {
    pub fn doc(&self) -> &str {
        self.doc_id.as_deref().unwrap_or("")
    }

    pub fn key(&self) -> PairKey {
        pair_key(self.doc(), &self.chapter, &self.label)
    }

    pub fn block_sets(&self) -> (BTreeSet<BlockRef>, BTreeSet<BlockRef>) {
        let doc = self.doc();
        (
            self.question_block_ids.iter().map(|b| b.resolve(doc)).collect(),
            self.solution_block_ids.iter().map(|b| b.resolve(doc)).collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldOwner {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    pub chapter: String,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldImagePlacement {
    pub image_ref: String,
    pub owner: GoldOwner,
    pub slot: Slot,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub rejected: bool,
}

impl GoldImagePlacement {
    pub fn key(&self) -> (PairKey, String, Slot) {
        let o = &self.owner;
        (
            pair_key(o.doc_id.as_deref().unwrap_or(""), &o.chapter, &o.label),
            self.image_ref.clone(),
            self.slot,
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub doc_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub documents: Vec<GoldDocument>,
    #[serde(default)]
    pub gold_pairs: Vec<GoldPair>,
    #[serde(default)]
    pub gold_image_placements: Vec<GoldImagePlacement>,
}

impl GoldAnnotation {
    /// Fill omitted doc ids and check key uniqueness and that every
    /// placement has an owner among the gold pairs.
    pub fn resolve(&mut self) -> Result<(), String> {
        let single = match self.doc_ids.as_slice() {
            [only] => Some(only.clone()),
            _ => None,
        };
        let n_docs = self.doc_ids.len();
        let fill = |doc_id: &mut Option<String>| {
            if doc_id.is_none() {
                *doc_id = single.clone();
            }
            doc_id.is_some()
        };
        let mut keys = HashSet::new();
        for p in &mut self.gold_pairs {
            if !fill(&mut p.doc_id) {
                return Err(format!(
                    "pair {:?}/{:?} has no doc_id and the annotation covers {n_docs} documents",
                    p.chapter, p.label
                ));
            }
            if !keys.insert(p.key()) {
                return Err(format!("duplicate gold pair {:?}/{:?} in {}", p.chapter, p.label, p.doc()));
            }
        }
        for g in &mut self.gold_image_placements {
            if !fill(&mut g.owner.doc_id) {
                return Err(format!(
                    "placement of {} has no owner doc_id and the annotation covers {n_docs} documents",
                    g.image_ref
                ));
            }
            if !keys.contains(&g.key().0) {
                return Err(format!(
                    "placement of {} names owner {:?}/{:?}, which is not a gold pair",
                    g.image_ref, g.owner.chapter, g.owner.label
                ));
            }
        }
        Ok(())
    }

    /// Only the entries owned by `doc_id`.
    pub fn restricted_to(&self, doc_id: &str) -> GoldAnnotation {
        GoldAnnotation {
            doc_ids: vec![doc_id.to_owned()],
            documents: self.documents.iter().filter(|d| d.doc_id == doc_id).cloned().collect(),
            gold_pairs: self.gold_pairs.iter().filter(|p| p.doc() == doc_id).cloned().collect(),
            gold_image_placements: self
                .gold_image_placements
                .iter()
                .filter(|g| g.owner.doc_id.as_deref() == Some(doc_id))
                .cloned()
                .collect(),
        }
    }
}

pub fn load_gold(path: &Path) -> Result<GoldAnnotation, GoldError> {
    let raw = std::fs::read_to_string(path).map_err(|source| GoldError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let schema = |message: String| GoldError::Schema {
        path: path.to_path_buf(),
        message,
    };
    let mut gold: GoldAnnotation = serde_json::from_str(&raw).map_err(|e| schema(e.to_string()))?;
    gold.resolve().map_err(schema)?;
    Ok(gold)
}
