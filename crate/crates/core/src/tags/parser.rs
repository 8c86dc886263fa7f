//! Recursive-descent parser over the fixed tag vocabulary.
//!
//! Tags are matched literally and element content is taken raw up to the
//! matching close tag, so answers may contain `<`, `&` or LaTeX. In lenient
//! mode a malformed `<qa_pair>` is dropped with a diagnostic and parsing
//! resumes at the next structural tag; in strict mode the first irregularity
//! is an error.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{normalize_label, Chapter, ExtractionResponse, RawQaPair, Title};
use crate::diagnostics::{snippet_at, Diagnostic, DiagnosticKind};
use crate::ingest::BlockId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMode {
    #[default]
    Lenient,
    Strict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseOutcome {
    pub response: ExtractionResponse,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("parse error at byte {offset}: expected {expected}, found {found:?}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
    pub kind: DiagnosticKind,
}

const STRUCTURAL: [&str; 4] = ["<qa_pair>", "</qa_pair>", "<chapter>", "</chapter>"];
const FIELDS: [&str; 4] = ["label", "question", "answer", "solution"];

pub fn parse_response(text: &str, mode: ParseMode) -> Result<ParseOutcome, ParseError> {
    Parser {
        src: text,
        pos: 0,
        strict: mode == ParseMode::Strict,
        diagnostics: Vec::new(),
    }
    .parse()
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    strict: bool,
    diagnostics: Vec<Diagnostic>,
}

/// An irregularity before it is either recorded or raised.
struct Issue {
    offset: usize,
    kind: DiagnosticKind,
    expected: String,
}

impl Issue {
    fn new(offset: usize, kind: DiagnosticKind, expected: impl Into<String>) -> Self {
        Self {
            offset,
            kind,
            expected: expected.into(),
        }
    }
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at(&self, tag: &str) -> bool {
        self.rest().starts_with(tag)
    }

    fn eat(&mut self, tag: &str) -> bool {
        if self.at(tag) {
            self.pos += tag.len();
            true
        } else {
            false
        }
    }

    fn eof(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn find_from(&self, mut from: usize, needle: &str) -> Option<usize> {
        while !self.src.is_char_boundary(from) {
            from += 1;
        }
        self.src[from..].find(needle).map(|i| i + from)
    }

    fn report(&mut self, issue: Issue) -> Result<(), ParseError> {
        let found = snippet_at(self.src, issue.offset);
        if self.strict {
            return Err(ParseError {
                offset: issue.offset,
                expected: issue.expected,
                found,
                kind: issue.kind,
            });
        }
        self.diagnostics.push(
            Diagnostic::new(issue.kind, format!("expected {}", issue.expected))
                .at(issue.offset)
                .with_snippet(found),
        );
        Ok(())
    }

    /// Jump to the earliest of `markers` at or after `from`, or to the end.
    fn skip_to_any(&mut self, from: usize, markers: &[&str]) -> Option<&'static str> {
        let hit = markers
            .iter()
            .filter_map(|m| self.find_from(from, m).map(|i| (i, *m)))
            .min_by_key(|(i, _)| *i);
        match hit {
            Some((i, m)) => {
                self.pos = i;
                STRUCTURAL.iter().copied().find(|s| *s == m)
            }
            None => {
                self.pos = self.src.len();
                None
            }
        }
    }

    fn parse(mut self) -> Result<ParseOutcome, ParseError> {
        self.skip_ws();
        if self.at("<empty>") {
            let open = self.pos;
            self.eat("<empty>");
            self.skip_ws();
            if !self.eat("</empty>") {
                self.report(Issue::new(open, DiagnosticKind::UnterminatedTag, "</empty>"))?;
            }
            self.skip_ws();
            if !self.eof() {
                self.report(Issue::new(self.pos, DiagnosticKind::UnexpectedText, "end of input"))?;
            }
            return Ok(self.finish(Vec::new()));
        }

        let mut chapters = Vec::new();
        loop {
            self.skip_ws();
            if self.eof() {
                break;
            }
            if self.at("<chapter>") {
                if let Some(ch) = self.chapter()? {
                    chapters.push(ch);
                }
                continue;
            }
            let junk = self.pos;
            self.report(Issue::new(junk, DiagnosticKind::UnexpectedText, "<chapter> or <empty>"))?;
            self.skip_to_any(junk + 1, &["<chapter>"]);
        }
        if chapters.is_empty() && self.src.trim().is_empty() {
            self.report(Issue::new(0, DiagnosticKind::UnexpectedText, "<chapter> or <empty>"))?;
        }
        Ok(self.finish(chapters))
    }

    fn finish(self, chapters: Vec<Chapter>) -> ParseOutcome {
        ParseOutcome {
            response: ExtractionResponse { chapters },
            diagnostics: self.diagnostics,
        }
    }

    /// Returns `None` for an unterminated chapter that held no pairs.
    fn chapter(&mut self) -> Result<Option<Chapter>, ParseError> {
        let open = self.pos;
        self.eat("<chapter>");
        self.skip_ws();
        let title = if self.at("<title>") {
            match self.element("title") {
                Ok((content, _)) => parse_title(&content),
                Err(issue) => {
                    self.report(issue)?;
                    self.skip_to_any(open + 1, &["<qa_pair>", "</chapter>", "<chapter>"]);
                    Title::blank()
                }
            }
        } else {
            self.report(Issue::new(self.pos, DiagnosticKind::NonCanonical, "<title>"))?;
            Title::blank()
        };

        let mut qa_pairs = Vec::new();
        let mut closed = false;
        loop {
            self.skip_ws();
            if self.eat("</chapter>") {
                closed = true;
                break;
            }
            if self.eof() || self.at("<chapter>") {
                self.report(Issue::new(open, DiagnosticKind::UnterminatedTag, "</chapter>"))?;
                break;
            }
            if self.at("<qa_pair>") {
                let start = self.pos;
                match self.qa_pair() {
                    Ok((pair, soft)) => {
                        for issue in soft {
                            self.report(issue)?;
                        }
                        qa_pairs.push(pair);
                    }
                    Err(issue) => {
                        self.report(issue)?;
                        let after = start + "<qa_pair>".len();
                        if self.skip_to_any(after, &STRUCTURAL) == Some("</qa_pair>") {
                            self.pos += "</qa_pair>".len();
                        }
                    }
                }
                continue;
            }
            let junk = self.pos;
            self.report(Issue::new(junk, DiagnosticKind::UnexpectedText, "<qa_pair> or </chapter>"))?;
            self.skip_to_any(junk + 1, &["<qa_pair>", "</chapter>", "<chapter>"]);
        }
        if !closed && qa_pairs.is_empty() {
            return Ok(None);
        }
        Ok(Some(Chapter { title, qa_pairs }))
    }

    /// `Ok` carries recoverable issues found inside an otherwise usable pair.
    fn qa_pair(&mut self) -> Result<(RawQaPair, Vec<Issue>), Issue> {
        let open = self.pos;
        self.eat("<qa_pair>");
        let mut values: [Option<(String, usize)>; 4] = Default::default();
        let mut order = Vec::with_capacity(4);
        loop {
            self.skip_ws();
            if self.eat("</qa_pair>") {
                break;
            }
            if self.eof() {
                return Err(Issue::new(open, DiagnosticKind::UnterminatedTag, "</qa_pair>"));
            }
            let Some(field) = FIELDS.iter().position(|f| self.at(&format!("<{f}>"))) else {
                return Err(Issue::new(
                    self.pos,
                    DiagnosticKind::MalformedPair,
                    "<label>, <question>, <answer>, <solution> or </qa_pair>",
                ));
            };
            if values[field].is_some() {
                return Err(Issue::new(
                    self.pos,
                    DiagnosticKind::MalformedPair,
                    format!("a single <{}>", FIELDS[field]),
                ));
            }
            values[field] = Some(self.element(FIELDS[field])?);
            order.push(field);
        }

        let mut soft = Vec::new();
        if order != [0, 1, 2, 3] {
            soft.push(Issue::new(
                open,
                DiagnosticKind::NonCanonical,
                "<label><question><answer><solution> in order",
            ));
        }
        let [label, question, answer, solution] = values;
        let mut ids = |field: Option<(String, usize)>| match field {
            Some((content, offset)) => parse_id_list(&content, offset, &mut soft),
            None => Vec::new(),
        };
        let question_ids = ids(question);
        let solution_ids = ids(solution);
        Ok((
            RawQaPair {
                label: label.map(|(l, _)| normalize_label(&l)).unwrap_or_default(),
                question_ids,
                answer_text: answer.map(|(a, _)| a).unwrap_or_default(),
                solution_ids,
            },
            soft,
        ))
    }

    /// Raw, trimmed content of `<tag>...</tag>` plus its byte offset. The
    /// content may not cross a structural tag.
    fn element(&mut self, tag: &str) -> Result<(String, usize), Issue> {
        let open = self.pos;
        let open_tag = format!("<{tag}>");
        let close_tag = format!("</{tag}>");
        self.pos += open_tag.len();
        let body = self.pos;
        let close = self.find_from(body, &close_tag);
        let fence = STRUCTURAL.iter().filter_map(|m| self.find_from(body, m)).min();
        match close {
            Some(c) if fence.is_none_or(|f| c < f) => {
                let raw = &self.src[body..c];
                let lead = raw.len() - raw.trim_start().len();
                self.pos = c + close_tag.len();
                Ok((raw.trim().to_owned(), body + lead))
            }
            _ => {
                self.pos = open;
                Err(Issue::new(open, DiagnosticKind::UnterminatedTag, close_tag))
            }
        }
    }
}

fn id_tokens(content: &str) -> impl Iterator<Item = &str> {
    content.split([',', '，']).map(str::trim)
}

fn parse_id_list(content: &str, offset: usize, issues: &mut Vec<Issue>) -> Vec<BlockId> {
    if content.trim().is_empty() {
        return Vec::new();
    }
    let mut ids = Vec::new();
    for token in id_tokens(content) {
        match token.parse::<u32>() {
            Ok(n) => ids.push(BlockId(n)),
            Err(_) => issues.push(Issue::new(
                offset,
                DiagnosticKind::InvalidId,
                format!("integer id, got {token:?}"),
            )),
        }
    }
    ids
}

fn parse_title(content: &str) -> Title {
    if content.is_empty() {
        return Title::blank();
    }
    let parsed: Option<Vec<BlockId>> = id_tokens(content).map(|t| t.parse().ok().map(BlockId)).collect();
    match parsed {
        Some(ids) => Title::Ids(ids),
        None => Title::Text(content.to_owned()),
    }
}
