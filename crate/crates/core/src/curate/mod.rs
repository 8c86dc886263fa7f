//! Benchmark curation over extracted pairs: question type, short canonical
//! answer, completeness, difficulty, and the text-only / text-image split.
//!
//! Stages run per pair in a fixed order and the first drop wins; LLM stages
//! after a drop are not called. All LLM traffic goes through a [`Gateway`],
//! so a cached transcript replays the whole curation deterministically.

mod solver;

use std::path::Path;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{Diagnostic, DiagnosticKind};
use crate::gateway::{CompletionRequest, Gateway, GatewayError};
use crate::prompting::{PromptError, PromptTemplate};
use crate::reconstruct::{Modality, QaPair, Segment};
use crate::util::write_atomic;

pub use solver::{SolverEntry, SolverResults};

const CLASSIFY_PROMPT: &str = include_str!("../../prompts/classify_question.txt");
const SHORT_ANSWER_PROMPT: &str = include_str!("../../prompts/short_answer.txt");
const COMPLETENESS_PROMPT: &str = include_str!("../../prompts/completeness.txt");

/// Reply meaning the item has no checkable final answer.
pub const NON_VERIFIABLE: &str = "NON_VERIFIABLE";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Proof,
    Explanation,
    FillInBlank,
    Calculation,
    MultipleChoice,
    Drawing,
    Other,
}

impl QuestionType {
    pub fn parse(reply: &str) -> Option<Self> {
        let token = reply
            .trim()
            .trim_matches(|c: char| c == '`' || c == '"' || c == '\'' || c == '.' || c.is_whitespace())
            .to_lowercase()
            .replace(['-', ' '], "_");
        Some(match token.as_str() {
            "proof" => QuestionType::Proof,
            "explanation" => QuestionType::Explanation,
            "fill_in_blank" | "fill_in_the_blank" => QuestionType::FillInBlank,
            "calculation" => QuestionType::Calculation,
            "multiple_choice" => QuestionType::MultipleChoice,
            "drawing" => QuestionType::Drawing,
            "other" | "others" => QuestionType::Other,
            _ => return None,
        })
    }

    /// Types whose answers cannot be checked against a short string.
    pub fn inherently_open(self) -> bool {
        matches!(self, QuestionType::Proof | QuestionType::Explanation)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Keep,
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NonVerifiable,
    ExcludedType,
    Incomplete,
    TooEasy,
    TooHard,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairRef {
    pub doc_id: String,
    pub chapter: String,
    pub label: String,
}

impl PairRef {
    pub fn of(p: &QaPair) -> Self {
        Self {
            doc_id: p.doc_id().to_owned(),
            chapter: p.chapter.clone(),
            label: p.label.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyOutcome {
    pub solved: usize,
    pub attempts: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationRecord {
    pub pair_key: PairRef,
    pub qtype: QuestionType,
    pub verifiable: bool,
    /// Empty when not verifiable.
    pub short_answer: String,
    pub modality_group: Modality,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<DropReason>,
    /// Absent when the difficulty stage was skipped or not reached.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<DifficultyOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    /// Answers at or under this many words (CJK characters count one each)
    /// pass through without an LLM call.
    pub short_answer_budget: usize,
    /// Case-insensitive phrases that mark a question as context-dependent.
    pub incomplete_patterns: Vec<String>,
    pub kept_types: Vec<QuestionType>,
    /// Drop as too easy when at least this fraction of solvers succeeded.
    pub too_easy_at: f64,
    /// Drop as too hard when at most this fraction succeeded, unless a
    /// human reviewed the item.
    pub too_hard_at: f64,
    pub skip_difficulty: bool,
    pub max_in_flight: usize,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            short_answer_budget: 16,
            incomplete_patterns: vec![
                "According to Theorem".into(),
                "See previous".into(),
                "Answered in text".into(),
            ],
            kept_types: vec![
                QuestionType::FillInBlank,
                QuestionType::Calculation,
                QuestionType::MultipleChoice,
            ],
            too_easy_at: 1.0,
            too_hard_at: 0.0,
            skip_difficulty: false,
            max_in_flight: 4,
        }
    }
}

/// The three curation prompts.
#[derive(Clone, Debug)]
pub struct CurationPrompts {
    pub classify: PromptTemplate,
    pub short_answer: PromptTemplate,
    pub completeness: PromptTemplate,
}

impl Default for CurationPrompts {
    fn default() -> Self {
        Self {
            classify: PromptTemplate::new("classify_question", CLASSIFY_PROMPT),
            short_answer: PromptTemplate::new("short_answer", SHORT_ANSWER_PROMPT),
            completeness: PromptTemplate::new("completeness", COMPLETENESS_PROMPT),
        }
    }
}

impl CurationPrompts {
    /// Files in `dir` named like the built-ins replace them.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut prompts = Self::default();
        for (slot, name) in [
            (&mut prompts.classify, "classify_question"),
            (&mut prompts.short_answer, "short_answer"),
            (&mut prompts.completeness, "completeness"),
        ] {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = PromptTemplate::load(&path)?;
            }
        }
        Ok(prompts)
    }
}

#[derive(Debug, Error)]
pub enum CurateError {
    #[error("{}/{}/{}: {source}", pair.doc_id, pair.chapter, pair.label)]
    Gateway {
        pair: Box<PairRef>,
        #[source]
        source: GatewayError,
    },
    #[error("no solver outcomes for {}/{}/{}", pair.doc_id, pair.chapter, pair.label)]
    MissingSolverData { pair: Box<PairRef> },
    #[error("difficulty stage needs a solver file (or skip the stage)")]
    NoSolverFile,
    #[error("{path}: {message}")]
    Input { path: String, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Curation {
    pub records: Vec<CurationRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Words plus CJK characters.
pub fn answer_tokens(s: &str) -> usize {
    s.split_whitespace()
        .map(|w| {
            let cjk = w.chars().filter(|&c| is_cjk(c)).count();
            cjk + usize::from(w.chars().any(|c| !is_cjk(c)))
        })
        .sum()
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32, 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x3040..=0x30FF | 0xAC00..=0xD7AF)
}

fn pair_slots(p: &QaPair) -> [(&'static str, String); 3] {
    [
        ("question", p.question_text()),
        ("answer", p.answer.clone()),
        ("solution", p.solution_text()),
    ]
}

async fn ask(gateway: &dyn Gateway, template: &PromptTemplate, p: &QaPair) -> Result<String, GatewayError> {
    let slots = pair_slots(p);
    let vars: Vec<(&str, &str)> = slots.iter().map(|(k, v)| (*k, v.as_str())).collect();
    let prompt = template.fill(&vars);
    Ok(gateway.complete(&CompletionRequest::new(prompt)).await?.text)
}

pub async fn classify_question_type(
    pair: &QaPair,
    gateway: &dyn Gateway,
    prompts: &CurationPrompts,
) -> Result<(QuestionType, Option<Diagnostic>), GatewayError> {
    let reply = ask(gateway, &prompts.classify, pair).await?;
    Ok(match QuestionType::parse(&reply) {
        Some(t) => (t, None),
        None => (
            QuestionType::Other,
            Some(
                Diagnostic::new(
                    DiagnosticKind::UnrecognizedReply,
                    format!("question type for {:?}/{:?} not recognized, using other", pair.chapter, pair.label),
                )
                .with_snippet(reply.chars().take(40).collect::<String>()),
            ),
        ),
    })
}

/// `(short_answer, verifiable)`. A concise answer passes through; otherwise
/// the model extracts one from the solution. A pair with neither an answer
/// nor a solution is not verifiable and costs no call.
pub async fn extract_short_answer(
    pair: &QaPair,
    gateway: &dyn Gateway,
    prompts: &CurationPrompts,
    cfg: &CurationConfig,
) -> Result<(String, bool), GatewayError> {
    let answer = pair.answer.trim();
    if !answer.is_empty() && answer_tokens(answer) <= cfg.short_answer_budget {
        return Ok((answer.to_owned(), true));
    }
    if answer.is_empty() && pair.solution.is_empty() {
        return Ok((String::new(), false));
    }
    let reply = ask(gateway, &prompts.short_answer, pair).await?;
    let reply = reply.trim();
    if reply.is_empty() || reply.contains(NON_VERIFIABLE) {
        return Ok((String::new(), false));
    }
    Ok((reply.to_owned(), true))
}

pub fn heuristic_incomplete(pair: &QaPair, patterns: &[String]) -> bool {
    let text = pair.question_text().to_lowercase();
    patterns.iter().any(|p| !p.is_empty() && text.contains(&p.to_lowercase()))
}

/// Partial pairs and pattern hits drop without a call; otherwise the model
/// decides. An unrecognized reply counts as incomplete.
pub async fn filter_completeness(
    pair: &QaPair,
    gateway: &dyn Gateway,
    prompts: &CurationPrompts,
    cfg: &CurationConfig,
) -> Result<(Verdict, Option<Diagnostic>), GatewayError> {
    if pair.partial || heuristic_incomplete(pair, &cfg.incomplete_patterns) {
        return Ok((Verdict::Drop, None));
    }
    let reply = ask(gateway, &prompts.completeness, pair).await?;
    let token = reply.trim().trim_matches(|c: char| !c.is_ascii_alphabetic()).to_uppercase();
    Ok(match token.as_str() {
        "COMPLETE" => (Verdict::Keep, None),
        "INCOMPLETE" => (Verdict::Drop, None),
        _ => (
            Verdict::Drop,
            Some(
                Diagnostic::new(
                    DiagnosticKind::UnrecognizedReply,
                    format!("completeness for {:?}/{:?} not recognized, treated as incomplete", pair.chapter, pair.label),
                )
                .with_snippet(reply.chars().take(40).collect::<String>()),
            ),
        ),
    })
}

/// Drop reason, if any, from K solver outcomes.
pub fn filter_difficulty(entry: &SolverEntry, cfg: &CurationConfig) -> Option<DropReason> {
    let k = entry.solved.len();
    let solved = entry.solved.iter().filter(|&&s| s).count();
    let fraction = solved as f64 / k as f64;
    if fraction >= cfg.too_easy_at {
        Some(DropReason::TooEasy)
    } else if fraction <= cfg.too_hard_at && !entry.human_reviewed {
        Some(DropReason::TooHard)
    } else {
        None
    }
}

pub fn split_modality(pairs: &[QaPair]) -> (Vec<&QaPair>, Vec<&QaPair>) {
    pairs.iter().partition(|p| p.modality == Modality::TextOnly)
}

async fn curate_one(
    pair: &QaPair,
    gateway: &dyn Gateway,
    prompts: &CurationPrompts,
    cfg: &CurationConfig,
    solver: Option<&SolverResults>,
) -> Result<(CurationRecord, Vec<Diagnostic>), CurateError> {
    let key = PairRef::of(pair);
    let llm = |source| CurateError::Gateway {
        pair: Box::new(key.clone()),
        source,
    };
    let mut notes = Vec::new();
    let (qtype, note) = classify_question_type(pair, gateway, prompts).await.map_err(llm)?;
    notes.extend(note);

    let mut record = CurationRecord {
        pair_key: key.clone(),
        qtype,
        verifiable: false,
        short_answer: String::new(),
        modality_group: pair.modality,
        verdict: Verdict::Drop,
        drop_reason: None,
        difficulty: None,
    };
    if !qtype.inherently_open() {
        let (short, ok) = extract_short_answer(pair, gateway, prompts, cfg).await.map_err(llm)?;
        record.short_answer = short;
        record.verifiable = ok;
    }
    if !record.verifiable {
        record.drop_reason = Some(DropReason::NonVerifiable);
        return Ok((record, notes));
    }
    if !cfg.kept_types.contains(&qtype) {
        record.drop_reason = Some(DropReason::ExcludedType);
        return Ok((record, notes));
    }
    let (verdict, note) = filter_completeness(pair, gateway, prompts, cfg).await.map_err(llm)?;
    notes.extend(note);
    if verdict == Verdict::Drop {
        record.drop_reason = Some(DropReason::Incomplete);
        return Ok((record, notes));
    }
    if !cfg.skip_difficulty {
        let entry = solver
            .ok_or(CurateError::NoSolverFile)?
            .get(pair)
            .filter(|e| !e.solved.is_empty())
            .ok_or_else(|| CurateError::MissingSolverData { pair: Box::new(key.clone()) })?;
        record.difficulty = Some(DifficultyOutcome {
            solved: entry.solved.iter().filter(|&&s| s).count(),
            attempts: entry.solved.len(),
        });
        if let Some(reason) = filter_difficulty(entry, cfg) {
            record.drop_reason = Some(reason);
            return Ok((record, notes));
        }
    }
    record.verdict = Verdict::Keep;
    Ok((record, notes))
}

/// One record per input pair, in input order.
pub async fn curate(
    pairs: &[QaPair],
    gateway: &dyn Gateway,
    prompts: &CurationPrompts,
    cfg: &CurationConfig,
    solver: Option<&SolverResults>,
) -> Result<Curation, CurateError> {
    if !cfg.skip_difficulty && solver.is_none() {
        return Err(CurateError::NoSolverFile);
    }
    let results: Vec<_> = stream::iter(pairs.iter().map(|p| curate_one(p, gateway, prompts, cfg, solver)))
        .buffered(cfg.max_in_flight.max(1))
        .collect()
        .await;
    let mut records = Vec::with_capacity(pairs.len());
    let mut diagnostics = Vec::new();
    for r in results {
        let (record, notes) = r?;
        records.push(record);
        diagnostics.extend(notes);
    }
    Ok(Curation { records, diagnostics })
}

/// A kept item as published: the short answer replaces the extracted one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub doc_id: String,
    pub chapter: String,
    pub label: String,
    pub qtype: QuestionType,
    pub question: Vec<Segment>,
    pub answer: String,
    pub solution: Vec<Segment>,
    pub modality: Modality,
}

/// Kept items split into `(text_only, text_image)`.
pub fn benchmark_split(pairs: &[QaPair], records: &[CurationRecord]) -> (Vec<BenchmarkItem>, Vec<BenchmarkItem>) {
    let kept: Vec<BenchmarkItem> = pairs
        .iter()
        .zip(records)
        .filter(|(_, r)| r.verdict == Verdict::Keep)
        .map(|(p, r)| BenchmarkItem {
            doc_id: r.pair_key.doc_id.clone(),
            chapter: p.chapter.clone(),
            label: p.label.clone(),
            qtype: r.qtype,
            question: p.question.clone(),
            answer: r.short_answer.clone(),
            solution: p.solution.clone(),
            modality: p.modality,
        })
        .collect();
    kept.into_iter().partition(|b| b.modality == Modality::TextOnly)
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect()
}

/// Write `curation.jsonl`, `text_only.jsonl` and `text_image.jsonl` into
/// `dir`. Returns the kept counts `(text_only, text_image)`.
pub fn write_curation(dir: &Path, pairs: &[QaPair], curation: &Curation) -> std::io::Result<(usize, usize)> {
    let (text_only, text_image) = benchmark_split(pairs, &curation.records);
    write_atomic(&dir.join("curation.jsonl"), jsonl(&curation.records).as_bytes())?;
    write_atomic(&dir.join("text_only.jsonl"), jsonl(&text_only).as_bytes())?;
    write_atomic(&dir.join("text_image.jsonl"), jsonl(&text_image).as_bytes())?;
    Ok((text_only.len(), text_image.len()))
}
