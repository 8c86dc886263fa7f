use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::evaluate::{
    predicted_placements, predicted_text_sets, Counts, DocumentReport, EvalReport, GoldAnnotation,
    GoldBlock, GoldImagePlacement, GoldOwner, GoldPair, ModalityScore,
};
use crate::reconstruct::QaPair;
use crate::util::sha256_hex;

/// Stable 16-hex key for a pair.
pub fn review_key(p: &QaPair) -> String {
    sha256_hex(format!("{}\u{1f}{}\u{1f}{}", p.doc_id(), p.chapter, p.label))[..16].to_owned()
}

/// A reviewer's verdict on one pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub pair_key: String,
    /// Whether the question got exactly its own answer and solution.
    pub text_ok: Option<bool>,
    /// Per image: placed in the right pair and slot.
    #[serde(default)]
    pub vision_ok: BTreeMap<String, bool>,
    #[serde(default)]
    pub note: String,
    pub version: u64,
}

/// Body of `POST /pairs/{key}/judgment`. `version` is the version the
/// client last saw, 0 for a pair never judged.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRequest {
    #[serde(default)]
    pub text_ok: Option<bool>,
    #[serde(default)]
    pub vision_ok: BTreeMap<String, bool>,
    #[serde(default)]
    pub note: String,
    #[serde(default)]
    pub version: u64,
}

#[derive(Debug, PartialEq, Eq)]
pub enum SubmitError {
    UnknownPair,
    Stale { current: u64 },
    Invalid(String),
    Journal(String),
}

pub struct Store {
    pairs: Vec<QaPair>,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    judgments: RwLock<HashMap<String, Judgment>>,
    journal: Mutex<Option<File>>,
}

impl Store {
    /// Index pairs and replay `journal` if it exists; later lines win.
    pub fn open(pairs: Vec<QaPair>, journal: Option<&Path>) -> std::io::Result<Self> {
        let mut keys = Vec::with_capacity(pairs.len());
        let mut index = HashMap::new();
        for (i, p) in pairs.iter().enumerate() {
            let mut key = review_key(p);
            if index.contains_key(&key) {
                key = sha256_hex(format!("{key}\u{1f}{i}"))[..16].to_owned();
            }
            index.insert(key.clone(), i);
            keys.push(key);
        }

        let mut judgments = HashMap::new();
        let mut file = None;
        if let Some(path) = journal {
            if path.exists() {
                for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<Judgment>(&line) {
                        Ok(j) if index.contains_key(&j.pair_key) => {
                            judgments.insert(j.pair_key.clone(), j);
                        }
                        Ok(j) => tracing::warn!("journal line {}: unknown pair {}", n + 1, j.pair_key),
                        Err(e) => tracing::warn!("journal line {}: {e}", n + 1),
                    }
                }
            }
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            file = Some(OpenOptions::new().create(true).append(true).open(path)?);
        }
        Ok(Self {
            pairs,
            keys,
            index,
            judgments: RwLock::new(judgments),
            journal: Mutex::new(file),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &QaPair)> {
        self.keys.iter().map(String::as_str).zip(&self.pairs)
    }

    pub fn get(&self, key: &str) -> Option<&QaPair> {
        self.index.get(key).map(|&i| &self.pairs[i])
    }

    pub fn judgment(&self, key: &str) -> Option<Judgment> {
        self.judgments.read().expect("lock").get(key).cloned()
    }

    pub fn judgments(&self) -> HashMap<String, Judgment> {
        self.judgments.read().expect("lock").clone()
    }

    /// Check the version, journal, then store. Returns the new version.
    pub fn submit(&self, key: &str, req: JudgmentRequest) -> Result<u64, SubmitError> {
        let pair = self.get(key).ok_or(SubmitError::UnknownPair)?;
        let images: Vec<&str> = pair.images().map(|(r, _, _)| r).collect();
        if let Some(bad) = req.vision_ok.keys().find(|k| !images.contains(&k.as_str())) {
            return Err(SubmitError::Invalid(format!("{bad} is not an image of this pair")));
        }
        if req.text_ok.is_none() && !req.vision_ok.is_empty() {
            return Err(SubmitError::Invalid("vision judgments need a text judgment".into()));
        }

        let mut judgments = self.judgments.write().expect("lock");
        let current = judgments.get(key).map_or(0, |j| j.version);
        if req.version != current {
            return Err(SubmitError::Stale { current });
        }
        let judgment = Judgment {
            pair_key: key.to_owned(),
            text_ok: req.text_ok,
            vision_ok: req.vision_ok,
            note: req.note,
            version: current + 1,
        };
        if let Some(f) = self.journal.lock().expect("lock").as_mut() {
            let line = serde_json::to_string(&judgment).expect("judgment serializes") + "\n";
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| SubmitError::Journal(e.to_string()))?;
        }
        judgments.insert(key.to_owned(), judgment);
        Ok(current + 1)
    }

    fn doc_order(&self) -> Vec<String> {
        let mut order: Vec<String> = Vec::new();
        for p in &self.pairs {
            if !order.iter().any(|d| d == p.doc_id()) {
                order.push(p.doc_id().to_owned());
            }
        }
        order
    }

    /// Metrics over judged pairs and images only: accepted counts as a hit,
    /// rejected as a false positive plus a miss.
    pub fn report(&self) -> EvalReport {
        let judgments = self.judgments();
        let mut text: HashMap<&str, Counts> = HashMap::new();
        let mut vision: HashMap<&str, Counts> = HashMap::new();
        let mark = |c: &mut Counts, ok: bool| {
            if ok {
                c.tp += 1;
            } else {
                c.fp += 1;
                c.fn_ += 1;
            }
        };
        for (key, p) in self.pairs() {
            let Some(j) = judgments.get(key) else { continue };
            if let Some(ok) = j.text_ok {
                mark(text.entry(p.doc_id()).or_default(), ok);
            }
            for (_, image_ref, _) in predicted_placements(p) {
                if let Some(&ok) = j.vision_ok.get(&image_ref) {
                    mark(vision.entry(p.doc_id()).or_default(), ok);
                }
            }
        }
        let per_document = self
            .doc_order()
            .into_iter()
            .map(|doc_id| DocumentReport {
                text: ModalityScore::from_counts(text.get(doc_id.as_str()).copied().unwrap_or_default()),
                vision: ModalityScore::from_counts(vision.get(doc_id.as_str()).copied().unwrap_or_default()),
                doc_id,
                title: None,
                pattern_type: None,
                layout: None,
            })
            .collect();
        EvalReport::from_documents(per_document)
    }

    /// Judgments as a gold file: accepted pairs and images are gold,
    /// rejected ones are recorded as misses.
    pub fn to_gold(&self) -> GoldAnnotation {
        let judgments = self.judgments();
        let mut gold = GoldAnnotation {
            doc_ids: self.doc_order(),
            ..GoldAnnotation::default()
        };
        for (key, p) in self.pairs() {
            let Some(j) = judgments.get(key) else { continue };
            let Some(ok) = j.text_ok else { continue };
            let (question, solution) = predicted_text_sets(p);
            gold.gold_pairs.push(GoldPair {
                doc_id: Some(p.doc_id().to_owned()),
                chapter: p.chapter.clone(),
                label: p.label.clone(),
                question_block_ids: question.into_iter().map(GoldBlock::Ref).collect(),
                solution_block_ids: solution.into_iter().map(GoldBlock::Ref).collect(),
                answer: p.answer.clone(),
                rejected: !ok,
            });
            for (_, image_ref, slot) in predicted_placements(p) {
                if let Some(&ok) = j.vision_ok.get(&image_ref) {
                    gold.gold_image_placements.push(GoldImagePlacement {
                        image_ref,
                        owner: GoldOwner {
                            doc_id: Some(p.doc_id().to_owned()),
                            chapter: p.chapter.clone(),
                            label: p.label.clone(),
                        },
                        slot,
                        rejected: !ok,
                    });
                }
            }
        }
        gold
    }
}
