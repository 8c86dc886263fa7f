use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CurateError;
use crate::evaluate::{pair_key, PairKey};
use crate::reconstruct::QaPair;

/// One line of the solver-outcome file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverEntry {
    pub doc_id: String,
    pub chapter: String,
    pub label: String,
    /// One outcome per solver model.
    pub solved: Vec<bool>,
    #[serde(default)]
    pub human_reviewed: bool,
}

#[derive(Clone, Debug, Default)]
pub struct SolverResults {
    entries: HashMap<PairKey, SolverEntry>,
}

impl SolverResults {
    pub fn new(entries: impl IntoIterator<Item = SolverEntry>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|e| (pair_key(&e.doc_id, &e.chapter, &e.label), e))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CurateError> {
        let input = |message: String| CurateError::Input {
            path: path.display().to_string(),
            message,
        };
        let raw = std::fs::read_to_string(path).map_err(|e| input(e.to_string()))?;
        let mut entries = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: SolverEntry =
                serde_json::from_str(line).map_err(|e| input(format!("line {}: {e}", i + 1)))?;
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn get(&self, pair: &QaPair) -> Option<&SolverEntry> {
        self.entries.get(&pair_key(pair.doc_id(), &pair.chapter, &pair.label))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
