//! Precision, recall and F1 for two modalities: text pairing (did the
//! question get exactly its own solution blocks) and image placement (did
//! each image land in the right pair and slot).

mod gold;
mod report;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::reconstruct::{BlockRef, QaPair, Segment};
use crate::util::fold_key;

pub use gold::{load_gold, GoldAnnotation, GoldBlock, GoldDocument, GoldError, GoldImagePlacement, GoldOwner, GoldPair, Slot};
pub use report::{format_table, write_report_json};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        Self { tp, fp, fn_ }
    }

    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when there were no predictions.
    pub precision: Option<f64>,
    /// `None` when there was no gold.
    pub recall: Option<f64>,
    pub f1: f64,
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn metrics(c: Counts) -> Metrics {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    Metrics {
        precision,
        recall,
        f1: f1(precision.unwrap_or(0.0), recall.unwrap_or(0.0)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalityScore {
    /// Gold items: pairs for text, images for vision.
    pub samples: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: f64,
}

impl ModalityScore {
    pub fn from_counts(c: Counts) -> Self {
        let m = metrics(c);
        Self {
            samples: c.tp + c.fn_,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts::new(self.tp, self.fp, self.fn_)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentReport {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
    pub text: ModalityScore,
    pub vision: ModalityScore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub text: ModalityScore,
    pub vision: ModalityScore,
    pub per_document: Vec<DocumentReport>,
}

impl EvalReport {
    /// Totals are the sums of the per-document counts.
    pub fn from_documents(per_document: Vec<DocumentReport>) -> Self {
        let mut text = Counts::default();
        let mut vision = Counts::default();
        for d in &per_document {
            text.add(d.text.counts());
            vision.add(d.vision.counts());
        }
        Self {
            text: ModalityScore::from_counts(text),
            vision: ModalityScore::from_counts(vision),
            per_document,
        }
    }
}

/// `(doc, chapter, label)` after whitespace collapse and case folding.
pub type PairKey = (String, String, String);

pub fn pair_key(doc_id: &str, chapter: &str, label: &str) -> PairKey {
    (doc_id.to_owned(), fold_key(chapter), fold_key(label))
}

fn text_blocks(segments: &[Segment], blocks: &[BlockRef]) -> BTreeSet<BlockRef> {
    segments
        .iter()
        .zip(blocks)
        .filter(|(s, _)| !s.is_image())
        .map(|(_, b)| b.clone())
        .collect()
}

/// Question and solution text-block sets taken from provenance.
pub fn predicted_text_sets(p: &QaPair) -> (BTreeSet<BlockRef>, BTreeSet<BlockRef>) {
    (
        text_blocks(&p.question, &p.provenance.question_blocks),
        text_blocks(&p.solution, &p.provenance.solution_blocks),
    )
}

/// `(owner key, image_ref, slot)` for each image in a prediction.
pub fn predicted_placements(p: &QaPair) -> Vec<(PairKey, String, Slot)> {
    let key = pair_key(p.doc_id(), &p.chapter, &p.label);
    p.images()
        .map(|(r, slot, _)| {
            let slot = if slot == "question" { Slot::Question } else { Slot::Solution };
            (key.clone(), r.to_owned(), slot)
        })
        .collect()
}

/// A prediction is a TP when a gold pair has the same key and exactly the
/// same question and solution text blocks. Each gold pair is used once.
/// `gold` must already have doc ids resolved.
pub fn match_text(pred: &[QaPair], gold: &GoldAnnotation) -> Counts {
    let mut open: HashMap<PairKey, (BTreeSet<BlockRef>, BTreeSet<BlockRef>)> = HashMap::new();
    let mut c = Counts::default();
    for g in &gold.gold_pairs {
        if g.rejected {
            c.fn_ += 1;
        } else {
            open.insert(g.key(), g.block_sets());
        }
    }
    for p in pred {
        let key = pair_key(p.doc_id(), &p.chapter, &p.label);
        let hit = open.get(&key).is_some_and(|sets| *sets == predicted_text_sets(p));
        if hit {
            open.remove(&key);
            c.tp += 1;
        } else {
            c.fp += 1;
        }
    }
    c.fn_ += open.len();
    c
}

/// Per image: TP when (image, owner, slot) is a gold placement, each gold
/// placement used once.
pub fn match_vision(pred: &[QaPair], gold: &GoldAnnotation) -> Counts {
    let mut open: HashMap<(PairKey, String, Slot), usize> = HashMap::new();
    let mut c = Counts::default();
    for g in &gold.gold_image_placements {
        if g.rejected {
            c.fn_ += 1;
        } else {
            *open.entry(g.key()).or_default() += 1;
        }
    }
    for p in pred {
        for placement in predicted_placements(p) {
            match open.get_mut(&placement) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    c.tp += 1;
                }
                _ => c.fp += 1,
            }
        }
    }
    c.fn_ += open.values().sum::<usize>();
    c
}

/// Score predictions against gold, one row pair per document: gold
/// documents first, then any document only the predictions mention.
pub fn evaluate(pred: &[QaPair], gold: &GoldAnnotation) -> EvalReport {
    let mut order: Vec<String> = gold.doc_ids.clone();
    for p in pred {
        if !order.iter().any(|d| d == p.doc_id()) {
            order.push(p.doc_id().to_owned());
        }
    }
    let per_document = order
        .iter()
        .map(|doc_id| {
            let preds: Vec<QaPair> = pred.iter().filter(|p| p.doc_id() == doc_id).cloned().collect();
            let g = gold.restricted_to(doc_id);
            let meta = gold.documents.iter().find(|d| &d.doc_id == doc_id);
            DocumentReport {
                doc_id: doc_id.clone(),
                title: meta.and_then(|m| m.title.clone()),
                pattern_type: meta.and_then(|m| m.pattern_type.clone()),
                layout: meta.and_then(|m| m.layout.clone()),
                text: ModalityScore::from_counts(match_text(&preds, &g)),
                vision: ModalityScore::from_counts(match_vision(&preds, &g)),
            }
        })
        .collect();
    EvalReport::from_documents(per_document)
}
