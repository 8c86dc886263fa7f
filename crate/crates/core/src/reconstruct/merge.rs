use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{BlockRef, QaPair};
use crate::diagnostics::{Diagnostic, DiagnosticKind};
use crate::util::fold_key;

/// How question-only and answer-only halves are keyed for joining.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchPolicy {
    #[default]
    ChapterAndLabel,
    /// For answer books whose chapter headings differ from the main text.
    LabelOnly,
}

fn merge_key(p: &QaPair, policy: MatchPolicy) -> (String, String) {
    let chapter = match policy {
        MatchPolicy::ChapterAndLabel => fold_key(&p.chapter),
        MatchPolicy::LabelOnly => String::new(),
    };
    (chapter, fold_key(&p.label))
}

fn describe(p: &QaPair) -> String {
    let chunks: Vec<String> = p
        .provenance
        .sources
        .iter()
        .map(|s| format!("{}#{}", s.doc_id, s.chunk_index))
        .collect();
    format!("{:?}/{:?} from {}", p.chapter, p.label, chunks.join(","))
}

fn join(question: &QaPair, answer: &QaPair) -> QaPair {
    let mut merged = question.clone();
    merged.answer = answer.answer.clone();
    merged.solution = answer.solution.clone();
    merged.provenance.solution_blocks = answer.provenance.solution_blocks.clone();
    merged.provenance.absorb_sources(&answer.provenance);
    for b in &answer.provenance.title_blocks {
        if !merged.provenance.title_blocks.contains(b) {
            merged.provenance.title_blocks.push(b.clone());
        }
    }
    merged.partial = false;
    merged.refresh_modality();
    merged
}

/// Join each question-only pair with the first answer-only pair (in input
/// order) that has the same key. Anything left unmatched stays, flagged
/// `partial`.
pub fn merge_cross_source(pairs: Vec<QaPair>, policy: MatchPolicy) -> (Vec<QaPair>, Vec<Diagnostic>) {
    let mut diagnostics = Vec::new();
    let mut answers: HashMap<(String, String), VecDeque<usize>> = HashMap::new();
    for (i, p) in pairs.iter().enumerate() {
        if p.is_answer_only() {
            answers.entry(merge_key(p, policy)).or_default().push_back(i);
        }
    }

    let mut consumed = vec![false; pairs.len()];
    let mut merged_at: HashMap<usize, QaPair> = HashMap::new();
    for (i, q) in pairs.iter().enumerate() {
        if !q.is_question_only() {
            continue;
        }
        let Some(queue) = answers.get_mut(&merge_key(q, policy)) else {
            continue;
        };
        let Some(first) = queue.pop_front() else {
            continue;
        };
        if !queue.is_empty() {
            let others: Vec<String> = queue.iter().map(|&j| describe(&pairs[j])).collect();
            diagnostics.push(Diagnostic::new(
                DiagnosticKind::AmbiguousMerge,
                format!(
                    "question {} has {} answer candidates; took {}, also matched {}",
                    describe(q),
                    queue.len() + 1,
                    describe(&pairs[first]),
                    others.join("; ")
                ),
            ));
        }
        consumed[first] = true;
        merged_at.insert(i, join(q, &pairs[first]));
    }

    let mut out = Vec::with_capacity(pairs.len());
    for (i, mut p) in pairs.into_iter().enumerate() {
        if consumed[i] {
            continue;
        }
        if let Some(m) = merged_at.remove(&i) {
            out.push(m);
            continue;
        }
        p.partial = p.is_question_only() || p.is_answer_only();
        out.push(p);
    }
    (out, diagnostics)
}

/// A longer solution wins, then a present short answer.
fn completeness(p: &QaPair) -> (usize, bool) {
    (p.solution_len(), !p.answer.is_empty())
}

/// Collapse overlap duplicates. Pairs with the same document, chapter,
/// label and question text become one, the most complete copy surviving in
/// the first copy's position. A half-pair whose blocks all sit inside a
/// complete pair with the same key is folded into it.
pub fn dedupe_overlaps(pairs: Vec<QaPair>) -> Vec<QaPair> {
    let mut slot_of: HashMap<(String, String, String, String), usize> = HashMap::new();
    let mut out: Vec<QaPair> = Vec::with_capacity(pairs.len());
    for p in pairs {
        let key = (
            p.doc_id().to_owned(),
            fold_key(&p.chapter),
            fold_key(&p.label),
            p.question_text(),
        );
        match slot_of.get(&key) {
            None => {
                slot_of.insert(key, out.len());
                out.push(p);
            }
            Some(&i) => {
                let kept = &mut out[i];
                if completeness(&p) > completeness(kept) {
                    let mut winner = p;
                    winner.provenance.absorb_sources(&kept.provenance);
                    *kept = winner;
                } else {
                    kept.provenance.absorb_sources(&p.provenance);
                }
            }
        }
    }

    let mut whole: HashMap<(String, String, String), Vec<usize>> = HashMap::new();
    for (i, p) in out.iter().enumerate() {
        if !p.question.is_empty() && (!p.solution.is_empty() || !p.answer.is_empty()) {
            whole
                .entry((p.doc_id().to_owned(), fold_key(&p.chapter), fold_key(&p.label)))
                .or_default()
                .push(i);
        }
    }
    let mut absorbed = vec![false; out.len()];
    for i in 0..out.len() {
        let p = &out[i];
        if !(p.is_question_only() || p.is_answer_only()) {
            continue;
        }
        let key = (p.doc_id().to_owned(), fold_key(&p.chapter), fold_key(&p.label));
        let Some(host) = whole.get(&key).and_then(|c| c.iter().copied().find(|&j| contains(&out[j], p))) else {
            continue;
        };
        let provenance = out[i].provenance.clone();
        out[host].provenance.absorb_sources(&provenance);
        absorbed[i] = true;
    }
    out.into_iter()
        .zip(absorbed)
        .filter_map(|(p, gone)| (!gone).then_some(p))
        .collect()
}

/// `part` adds nothing to `whole`.
fn contains(whole: &QaPair, part: &QaPair) -> bool {
    let subset = |a: &[BlockRef], b: &[BlockRef]| a.iter().all(|x| b.contains(x));
    subset(&part.provenance.question_blocks, &whole.provenance.question_blocks)
        && subset(&part.provenance.solution_blocks, &whole.provenance.solution_blocks)
        && (part.answer.is_empty() || part.answer == whole.answer)
}

/// Suffix `#2`, `#3`, ... onto labels that recur within one document and
/// chapter after merging, so every pair has a unique key.
pub fn disambiguate_labels(pairs: &mut [QaPair]) -> Vec<Diagnostic> {
    let mut seen: HashMap<(String, String, String), usize> = HashMap::new();
    let mut diagnostics = Vec::new();
    for p in pairs.iter_mut() {
        let key = (p.doc_id().to_owned(), fold_key(&p.chapter), fold_key(&p.label));
        let n = seen.entry(key).or_insert(0);
        *n += 1;
        if *n > 1 {
            let renamed = format!("{}#{}", p.label, n);
            diagnostics.push(Diagnostic::new(
                DiagnosticKind::DuplicateLabel,
                format!("{:?}/{:?} in {} repeats; renamed {:?}", p.chapter, p.label, p.doc_id(), renamed),
            ));
            p.label = renamed;
        }
    }
    diagnostics
}
