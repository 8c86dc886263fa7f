//! Twelve mixed pairs with what a correct curation model would reply for
//! each, plus the verdict those replies imply.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use vqa_miner::curate::QuestionType;
use vqa_miner::gateway::{CachedGateway, FnGateway, Gateway, ResponseCache};
use vqa_miner::ingest::BlockId;
use vqa_miner::reconstruct::{BlockRef, Modality, Provenance, QaPair, Segment};

pub struct Case {
    pub pair: QaPair,
    pub qtype: QuestionType,
    /// Reply to the short-answer prompt, if it gets asked.
    pub short_reply: &'static str,
    /// Reply to the completeness prompt, if it gets asked.
    pub complete_reply: &'static str,
    pub verifiable: bool,
    pub complete: bool,
}

impl Case {
    pub fn keep(&self) -> bool {
        self.verifiable
            && matches!(self.qtype, QuestionType::FillInBlank | QuestionType::Calculation | QuestionType::MultipleChoice)
            && self.complete
    }
}

fn pair(n: u32, question: &str, q_image: bool, answer: &str, solution: &str, s_image: bool) -> QaPair {
    let b = |id: u32| BlockRef {
        doc_id: "mixed".into(),
        id: BlockId(id),
    };
    let mut q = vec![Segment::Text(format!("[P{n}] {question}"))];
    let mut qb = vec![b(n * 10)];
    if q_image {
        q.push(Segment::Image(format!("images/q{n}.png")));
        qb.push(b(n * 10 + 1));
    }
    let mut s = Vec::new();
    let mut sb = Vec::new();
    if !solution.is_empty() {
        s.push(Segment::Text(solution.into()));
        sb.push(b(n * 10 + 2));
    }
    if s_image {
        s.push(Segment::Image(format!("images/s{n}.png")));
        sb.push(b(n * 10 + 3));
    }
    let image = q_image || s_image;
    let mut p = QaPair {
        chapter: "Mixed".into(),
        label: n.to_string(),
        question: q,
        answer: answer.into(),
        solution: s,
        modality: if image { Modality::TextImage } else { Modality::TextOnly },
        partial: false,
        provenance: Provenance {
            question_blocks: qb,
            solution_blocks: sb,
            ..Provenance::default()
        },
    };
    p.partial = p.is_question_only();
    p
}

pub fn cases() -> Vec<Case> {
    use QuestionType::*;
    let long = "We expand the product term by term, collect like powers, and simplify the resulting expression carefully until only one numeric value remains, which is 42.";
    vec![
        Case { pair: pair(1, "Compute 6 * 7.", false, "42", "6 * 7 = 42.", false), qtype: Calculation, short_reply: "", complete_reply: "COMPLETE", verifiable: true, complete: true },
        Case { pair: pair(2, "Find the area of the shaded triangle.", true, "", long, false), qtype: Calculation, short_reply: "42", complete_reply: "COMPLETE", verifiable: true, complete: true },
        Case { pair: pair(3, "The derivative of x^2 is ____.", false, "2x", "", false), qtype: FillInBlank, short_reply: "", complete_reply: "COMPLETE", verifiable: true, complete: true },
        Case { pair: pair(4, "Which graph is increasing? (A) f (B) g", false, "B", "g rises left to right, see plot.", true), qtype: MultipleChoice, short_reply: "", complete_reply: "COMPLETE", verifiable: true, complete: true },
        Case { pair: pair(5, "Prove that sqrt 2 is irrational.", false, "", "Suppose sqrt 2 = p/q in lowest terms...", false), qtype: Proof, short_reply: "", complete_reply: "", verifiable: false, complete: true },
        Case { pair: pair(6, "Explain why the series diverges.", false, "", "The terms do not tend to zero.", false), qtype: Explanation, short_reply: "", complete_reply: "", verifiable: false, complete: true },
        Case { pair: pair(7, "Sketch y = |x|.", true, "V shape", "", true), qtype: Drawing, short_reply: "", complete_reply: "", verifiable: true, complete: true },
        Case { pair: pair(8, "Name the mathematician who proved it.", false, "Euler", "", false), qtype: Other, short_reply: "", complete_reply: "", verifiable: true, complete: true },
        Case { pair: pair(9, "Using the table, find the mean.", false, "3.5", "", false), qtype: Calculation, short_reply: "", complete_reply: "INCOMPLETE", verifiable: true, complete: false },
        Case { pair: pair(10, "According to Theorem 2, compute the limit.", false, "0", "", false), qtype: Calculation, short_reply: "", complete_reply: "COMPLETE", verifiable: true, complete: false },
        Case { pair: pair(11, "Discuss the convergence of the integral.", true, "", long, false), qtype: Calculation, short_reply: "NON_VERIFIABLE", complete_reply: "COMPLETE", verifiable: false, complete: true },
        Case { pair: pair(12, "Evaluate the integral of x from 0 to 2.", false, "", "", false), qtype: Calculation, short_reply: "2", complete_reply: "COMPLETE", verifiable: false, complete: false },
    ]
}

fn case_of(prompt: &str) -> Option<usize> {
    let start = prompt.find("[P")? + 2;
    let end = start + prompt[start..].find(']')?;
    prompt[start..end].parse::<usize>().ok().map(|n| n - 1)
}

fn type_token(t: QuestionType) -> &'static str {
    match t {
        QuestionType::Proof => "proof",
        QuestionType::Explanation => "Explanation.",
        QuestionType::FillInBlank => "fill-in-the-blank",
        QuestionType::Calculation => "calculation",
        QuestionType::MultipleChoice => "`multiple_choice`",
        QuestionType::Drawing => "drawing",
        QuestionType::Other => "other",
    }
}

/// Scripted model: routes by prompt kind and the `[Pn]` tag in the question.
/// Also returns the shared per-stage call log.
/// Prompt kind and pair index per call.
pub type CallLog = Arc<std::sync::Mutex<Vec<(String, usize)>>>;

pub fn model() -> (Arc<dyn Gateway>, CallLog) {
    let cases = cases();
    let table: HashMap<usize, (&'static str, &'static str, &'static str)> = cases
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (type_token(c.qtype), c.short_reply, c.complete_reply)))
        .collect();
    let log = Arc::new(std::sync::Mutex::new(Vec::new()));
    let seen = log.clone();
    let gw = FnGateway::new(move |req| {
        let i = case_of(&req.prompt).expect("every curation prompt names its pair");
        let (t, s, c) = table[&i];
        let (stage, reply) = if req.prompt.starts_with("Classify") {
            ("classify", t)
        } else if req.prompt.starts_with("Extract the short") {
            ("short_answer", s)
        } else {
            ("completeness", c)
        };
        seen.lock().unwrap().push((stage.to_owned(), i));
        Ok(reply.to_owned())
    });
    (Arc::new(gw), log)
}

/// Record the scripted model once, return a replay-only gateway over it.
pub async fn replayed(cache: &Path) -> CachedGateway {
    use vqa_miner::curate::{curate, CurationConfig, CurationPrompts};
    let (model, _) = model();
    let warm = CachedGateway::new(model, ResponseCache::new(cache), "mock-curator", 0.0);
    let pairs: Vec<QaPair> = cases().into_iter().map(|c| c.pair).collect();
    let cfg = CurationConfig {
        skip_difficulty: true,
        ..CurationConfig::default()
    };
    curate(&pairs, &warm, &CurationPrompts::default(), &cfg, None).await.unwrap();
    CachedGateway::replay_only(ResponseCache::new(cache), "mock-curator", 0.0)
}
