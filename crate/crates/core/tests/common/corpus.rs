//! Synthetic four-file corpus covering the three layout patterns, a
//! truth model for it, the mock-LLM transcript that truth implies, and
//! the matching gold annotation.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::{json, Value};
use vqa_miner::evaluate::{GoldAnnotation, GoldBlock, GoldDocument, GoldImagePlacement, GoldOwner, GoldPair, Slot};
use vqa_miner::gateway::{CachedGateway, FnGateway, Gateway, ResponseCache};
use vqa_miner::ingest::{chunk_document, load_mineru_document, BlockId, DocumentSource};
use vqa_miner::pipeline::{run_extraction, Extraction, ExtractionConfig};
use vqa_miner::prompting::{build_extraction_prompt, PromptTemplate};
use vqa_miner::reconstruct::BlockRef;

pub const WINDOW: usize = 10;
pub const OVERLAP: usize = 2;
pub const MODEL: &str = "mock-model";

#[derive(Clone, Debug)]
pub struct TruthPair {
    /// What the mock model writes in `<label>`.
    pub raw_label: String,
    /// Expected label after normalization.
    pub label: String,
    pub answer: String,
    /// Question blocks in reading order, images included.
    pub question: Vec<BlockRef>,
    pub solution: Vec<BlockRef>,
}

#[derive(Clone, Debug)]
struct Block {
    kind: &'static str,
    text: String,
    img: Option<String>,
}

struct DocSpec {
    id: &'static str,
    subject: &'static str,
    title: &'static str,
    pattern: &'static str,
    layout: &'static str,
    two_column: bool,
    blocks: Vec<Block>,
}

impl DocSpec {
    fn new(id: &'static str, subject: &'static str, title: &'static str, pattern: &'static str, layout: &'static str) -> Self {
        Self {
            id,
            subject,
            title,
            pattern,
            layout,
            two_column: layout == "two-column",
            blocks: Vec::new(),
        }
    }

    fn push(&mut self, kind: &'static str, text: &str, img: Option<String>) -> BlockRef {
        self.blocks.push(Block {
            kind,
            text: text.to_owned(),
            img,
        });
        BlockRef {
            doc_id: self.id.to_owned(),
            id: BlockId(self.blocks.len() as u32 - 1),
        }
    }

    fn title(&mut self, text: &str) -> BlockRef {
        self.push("title", text, None)
    }

    fn text(&mut self, text: &str) -> BlockRef {
        self.push("text", text, None)
    }

    fn image(&mut self, name: &str) -> BlockRef {
        self.push("image", "", Some(format!("images/{name}")))
    }

    fn records(&self) -> Value {
        let per_page = 8;
        let records: Vec<Value> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let slot = i % per_page;
                let bbox = if self.two_column {
                    let col = (slot / 4) as f64;
                    let row = (slot % 4) as f64;
                    [60.0 + col * 450.0, 80.0 + row * 200.0, 480.0 + col * 450.0, 240.0 + row * 200.0]
                } else {
                    let row = slot as f64;
                    [80.0, 60.0 + row * 110.0, 920.0, 150.0 + row * 110.0]
                };
                let mut r = json!({"type": b.kind, "page_idx": i / per_page, "bbox": bbox});
                match &b.img {
                    Some(p) => r["img_path"] = json!(p),
                    None => r["text"] = json!(b.text),
                }
                r
            })
            .collect();
        Value::Array(records)
    }
}

fn pair(raw: &str, label: &str, answer: &str, question: Vec<BlockRef>, solution: Vec<BlockRef>) -> TruthPair {
    TruthPair {
        raw_label: raw.to_owned(),
        label: label.to_owned(),
        answer: answer.to_owned(),
        question,
        solution,
    }
}

fn specs() -> (Vec<DocSpec>, Vec<TruthPair>) {
    let mut pairs = Vec::new();

    let mut d = DocSpec::new("interleaved", "calculus", "Calculus Exercises", "interleaved", "single-column");
    d.title("Chapter 1 Limits");
    let q = d.text("Exercise 1.1 Compute $\\lim_{x\\to 0} \\frac{\\sin x}{x}$.");
    let s = d.text("Solution. By the squeeze theorem the limit is $1$.");
    pairs.push(pair("Exercise 1.1", "Exercise 1", "1", vec![q], vec![s]));
    let q1 = d.text("Exercise 1.2 Find the limit at $x=1$ of the function graphed below.");
    let q2 = d.image("lim_1_2.png");
    let s = d.text("Solution. Reading the graph, the limit is $2$.");
    pairs.push(pair("Exercise 1.2", "Exercise 2", "2", vec![q1, q2], vec![s]));
    d.text("Remark. A limit need not exist.");
    let q = d.text("Exercise 1.3 Give $\\pi$ to two decimal places.");
    pairs.push(pair("Exercise 1.3", "Exercise 3", "3.14", vec![q], vec![]));
    let q = d.text("Exercise 1.4 Evaluate $\\lim_{n\\to\\infty}(1+1/n)^n$.");
    let s1 = d.text("Solution. This is one definition of $e$.");
    let s2 = d.text("Hence the limit is $e$.");
    pairs.push(pair("Exercise 1.4", "Exercise 4", "e", vec![q], vec![s1, s2]));
    d.title("Chapter 2 Derivatives");
    let q = d.text("Exercise 2.1 Differentiate $x^3$.");
    let s1 = d.text("Solution. $3x^2$, plotted below.");
    let s2 = d.image("deriv_2_1.png");
    pairs.push(pair("Exercise 2.1", "Exercise 1", "3x^2", vec![q], vec![s1, s2]));
    let q1 = d.text("Exercise 2.2 Find the tangent line at $x=1$ in the figure.");
    let q2 = d.image("deriv_2_2.png");
    let s = d.text("Solution. $y = 2x - 1$.");
    pairs.push(pair("Exercise 2.2", "Exercise 2", "y = 2x - 1", vec![q1, q2], vec![s]));
    let q = d.text("Exercise 2.3 Differentiate $\\sin x$.");
    let s = d.text("Solution. $\\cos x$.");
    pairs.push(pair("Exercise 2.3", "Exercise 3", "\\cos x", vec![q], vec![s]));
    d.text("End of chapter.");
    let interleaved = d;

    let mut dq = DocSpec::new("algebra_questions", "abstract algebra", "Algebra", "long-distance", "single-column");
    let mut da = DocSpec::new("algebra_answers", "abstract algebra", "Algebra: Solutions", "long-distance", "single-column");
    dq.title("Chapter 1 Groups");
    da.title("Answers to Exercises");
    da.title("Chapter 1 Groups");
    let q = dq.text("1. Show that the identity element of a group is unique.");
    let s = da.text("1. If $e$ and $f$ are identities then $e = ef = f$.");
    pairs.push(pair("1.", "1", "", vec![q], vec![s]));
    let q1 = dq.image("cayley_1_2.png");
    let q2 = dq.text("2. Using the Cayley table above, find the order of $a$.");
    let s1 = da.text("2. The table gives $a^4 = e$ and no smaller power, so the order is 4.");
    let s2 = da.image("cayley_ans_2.png");
    pairs.push(pair("2.", "2", "4", vec![q1, q2], vec![s1, s2]));
    let q = dq.text("3. Compute the order of $3$ in $\\mathbb{Z}/12$.");
    let s = da.text("3. The order is $12/\\gcd(3,12) = 4$.");
    pairs.push(pair("3.", "3", "4", vec![q], vec![s]));
    dq.text("Hints for these exercises are at the back of the book.");
    dq.title("Chapter 2 Rings");
    da.title("Chapter 2 Rings");
    let q = dq.text("1. Prove that every field is an integral domain.");
    let s = da.text("1. If $ab = 0$ and $a \\ne 0$ then $b = a^{-1}ab = 0$.");
    pairs.push(pair("1.", "1", "", vec![q], vec![s]));
    let q = dq.text("2. Find the units of $\\mathbb{Z}/8$.");
    let s = da.text("2. The units are $1, 3, 5, 7$.");
    pairs.push(pair("2.", "2", "1, 3, 5, 7", vec![q], vec![s]));
    let q1 = dq.image("ideal_2_3.png");
    let q2 = dq.text("3. Which ideal of $k[x]$ does the diagram show?");
    let s = da.text("3. The ideal generated by $x$.");
    pairs.push(pair("3.", "3", "(x)", vec![q1, q2], vec![s]));

    let mut c = DocSpec::new("cjk_multicolumn", "高中数学", "高中数学习题集", "long-distance", "two-column");
    let ch1 = "第一章 函数";
    let ch2 = "第二章 数列";
    c.title(ch1);
    let q1 = c.text("习题 I 求函数 $f(x)=\\sqrt{x-1}$ 的定义域。");
    let q2a = c.text("习题 II 判断下图所示函数 $f(x)=x^3$ 的奇偶性。");
    let q2b = c.image("odd_fn.png");
    let q3 = c.text("习题 III 作出 $y=|x|$ 的图像。");
    c.title(ch2);
    let q4 = c.text("习题 I 求等差数列 $1,4,7,\\dots$ 的通项公式。");
    let q5 = c.text("习题 II 求 $1+2+\\dots+100$。");
    c.text("本章习题答案见书末。");
    c.title("参考答案");
    c.title(ch1);
    let s1 = c.text("习题 I $x \\ge 1$。");
    let s2 = c.text("习题 II 奇函数，因为 $f(-x)=-f(x)$。");
    let s3a = c.text("习题 III 图像为 V 字形，如下图。");
    let s3b = c.image("abs_graph.png");
    c.title(ch2);
    let s4 = c.text("习题 I $a_n = 3n - 2$。");
    let s5 = c.text("习题 II $5050$。");
    pairs.push(pair("习题 I", "习题 1", "x \\ge 1", vec![q1], vec![s1]));
    pairs.push(pair("习题 II", "习题 2", "奇函数", vec![q2a, q2b], vec![s2]));
    pairs.push(pair("习题 III", "习题 3", "", vec![q3], vec![s3a, s3b]));
    pairs.push(pair("习题 I", "习题 1", "a_n = 3n - 2", vec![q4], vec![s4]));
    pairs.push(pair("习题 II", "习题 2", "5050", vec![q5], vec![s5]));

    (vec![interleaved, dq, da, c], pairs)
}

pub struct Corpus {
    pub dir: tempfile::TempDir,
    pub docs: Vec<DocumentSource>,
    pub pairs: Vec<TruthPair>,
    pub paths: Vec<PathBuf>,
    meta: Vec<GoldDocument>,
}

/// Written-out corpus with its truth.
pub fn build() -> Corpus {
    let dir = tempfile::tempdir().expect("tempdir");
    let (specs, pairs) = specs();
    let mut docs = Vec::new();
    let mut paths = Vec::new();
    let mut meta = Vec::new();
    for spec in &specs {
        let doc_dir = dir.path().join(spec.id);
        std::fs::create_dir_all(doc_dir.join("images")).unwrap();
        for b in &spec.blocks {
            if let Some(img) = &b.img {
                std::fs::write(doc_dir.join(img), format!("fake png {img}")).unwrap();
            }
        }
        let path = doc_dir.join("content_list.json");
        std::fs::write(&path, serde_json::to_string_pretty(&spec.records()).unwrap()).unwrap();
        docs.push(load_mineru_document(&path, spec.id, spec.subject).expect("fixture loads"));
        paths.push(path);
        meta.push(GoldDocument {
            doc_id: spec.id.to_owned(),
            title: Some(spec.title.to_owned()),
            pattern_type: Some(spec.pattern.to_owned()),
            layout: Some(spec.layout.to_owned()),
        });
    }
    Corpus {
        dir,
        docs,
        pairs,
        paths,
        meta,
    }
}

pub fn extraction_config() -> ExtractionConfig {
    ExtractionConfig {
        window: WINDOW,
        overlap: OVERLAP,
        ..ExtractionConfig::default()
    }
}

impl Corpus {
    pub fn doc(&self, id: &str) -> &DocumentSource {
        self.docs.iter().find(|d| d.doc_id == id).expect("known doc")
    }

    fn is_title(&self, b: &BlockRef) -> bool {
        self.doc(&b.doc_id).block(b.id).unwrap().kind.as_str() == "title"
    }

    pub fn is_image(&self, b: &BlockRef) -> bool {
        self.doc(&b.doc_id).block(b.id).unwrap().is_image()
    }

    pub fn image_ref(&self, b: &BlockRef) -> String {
        self.doc(&b.doc_id).block(b.id).unwrap().image_ref.clone().unwrap()
    }

    /// Nearest title block at or before `b` in its document.
    fn section_of(&self, b: &BlockRef) -> BlockRef {
        (0..=b.id.0)
            .rev()
            .map(|i| BlockRef {
                doc_id: b.doc_id.clone(),
                id: BlockId(i),
            })
            .find(|r| self.is_title(r))
            .expect("every block sits under a title")
    }

    pub fn chapter_of(&self, p: &TruthPair) -> String {
        let first = p.question.first().or(p.solution.first()).unwrap();
        let t = self.section_of(first);
        self.doc(&t.doc_id).block(t.id).unwrap().text.clone()
    }

    pub fn owner_doc(p: &TruthPair) -> &str {
        &p.question.first().or(p.solution.first()).unwrap().doc_id
    }

    /// What a correct model would answer for one chunk of `doc`.
    pub fn reply_for(&self, pairs: &[TruthPair], doc: &str, chunk: &[BlockId]) -> String {
        let visible = |part: &[BlockRef]| {
            !part.is_empty() && part.iter().all(|b| b.doc_id == doc && chunk.contains(&b.id))
        };
        // section title id -> [(first block id, rendered qa_pair)]
        let mut sections: BTreeMap<u32, Vec<(u32, String)>> = BTreeMap::new();
        for &id in chunk {
            let r = BlockRef {
                doc_id: doc.to_owned(),
                id,
            };
            if self.is_title(&r) {
                sections.entry(id.0).or_default();
            }
        }
        let ids = |part: &[BlockRef]| part.iter().map(|b| b.id.0.to_string()).collect::<Vec<_>>().join(",");
        for p in pairs {
            let q_in = visible(&p.question);
            let s_in = visible(&p.solution);
            let (q, a, s) = match (q_in, s_in) {
                (true, true) => (ids(&p.question), p.answer.as_str(), ids(&p.solution)),
                (true, false) if p.solution.is_empty() => (ids(&p.question), p.answer.as_str(), String::new()),
                (true, false) => (ids(&p.question), "", String::new()),
                (false, true) => (String::new(), p.answer.as_str(), ids(&p.solution)),
                (false, false) => continue,
            };
            let first = if q_in { &p.question[0] } else { &p.solution[0] };
            let section = self.section_of(first).id.0;
            sections.entry(section).or_default().push((
                first.id.0,
                format!(
                    "<qa_pair><label>{}</label><question>{q}</question>\n<answer>{a}</answer><solution>{s}</solution></qa_pair>\n",
                    p.raw_label
                ),
            ));
        }
        if sections.values().all(Vec::is_empty) {
            return "<empty></empty>".into();
        }
        let mut out = String::new();
        for (title, mut items) in sections {
            items.sort();
            let title = if chunk.contains(&BlockId(title)) { title.to_string() } else { String::new() };
            out.push_str(&format!("<chapter><title>{title}</title>\n"));
            for (_, item) in items {
                out.push_str(&item);
            }
            out.push_str("</chapter>\n");
        }
        out
    }

    /// Prompt text to reply, for every chunk of every document.
    pub fn transcript(&self, pairs: &[TruthPair]) -> HashMap<String, String> {
        let template = PromptTemplate::builtin_extraction();
        let mut out = HashMap::new();
        for doc in &self.docs {
            for chunk in chunk_document(doc, WINDOW, OVERLAP).unwrap() {
                let prompt = build_extraction_prompt(&chunk, doc, &doc.subject, &template).unwrap();
                out.insert(prompt.text, self.reply_for(pairs, &doc.doc_id, &chunk.block_ids));
            }
        }
        out
    }

    pub fn gold(&self) -> GoldAnnotation {
        let mut gold = GoldAnnotation::default();
        for p in &self.pairs {
            let doc = Self::owner_doc(p).to_owned();
            if !gold.doc_ids.contains(&doc) {
                gold.doc_ids.push(doc.clone());
                gold.documents.push(self.meta.iter().find(|m| m.doc_id == doc).unwrap().clone());
            }
            let chapter = self.chapter_of(p);
            let text_only = |part: &[BlockRef]| {
                part.iter().filter(|b| !self.is_image(b)).cloned().map(GoldBlock::Ref).collect::<Vec<_>>()
            };
            gold.gold_pairs.push(GoldPair {
                doc_id: Some(doc.clone()),
                chapter: chapter.clone(),
                label: p.label.clone(),
                question_block_ids: text_only(&p.question),
                solution_block_ids: text_only(&p.solution),
                answer: p.answer.clone(),
                rejected: false,
            });
            for (part, slot) in [(&p.question, Slot::Question), (&p.solution, Slot::Solution)] {
                for b in part.iter().filter(|b| self.is_image(b)) {
                    gold.gold_image_placements.push(GoldImagePlacement {
                        image_ref: self.image_ref(b),
                        owner: GoldOwner {
                            doc_id: Some(doc.clone()),
                            chapter: chapter.clone(),
                            label: p.label.clone(),
                        },
                        slot,
                        rejected: false,
                    });
                }
            }
        }
        gold
    }

    pub fn write_gold(&self, path: &Path) {
        std::fs::write(path, serde_json::to_string_pretty(&self.gold()).unwrap()).unwrap();
    }

    /// The truth with one wrong extra solution id and one dropped question
    /// image. Returns the perturbed pairs.
    pub fn perturbed(&self) -> Vec<TruthPair> {
        let mut pairs = self.pairs.clone();
        // Exercise 1.2's solution swallows the remark after it.
        let i = pairs.iter().position(|p| p.raw_label == "Exercise 1.2").unwrap();
        let s = pairs[i].solution[0].clone();
        pairs[i].solution.push(BlockRef {
            doc_id: s.doc_id,
            id: BlockId(s.id.0 + 1),
        });
        // 习题 II in chapter one loses its figure.
        let j = pairs
            .iter()
            .position(|p| p.raw_label == "习题 II" && p.question.len() == 2)
            .unwrap();
        pairs[j].question.retain(|b| !self.is_image(b));
        pairs
    }
}

pub fn oracle_gateway(transcript: HashMap<String, String>) -> Arc<dyn Gateway> {
    Arc::new(FnGateway::new(move |req| {
        Ok(transcript
            .get(&req.prompt)
            .cloned()
            .unwrap_or_else(|| "<empty></empty>".into()))
    }))
}

/// Record `transcript` into `cache_dir` through the cache, then run again
/// from the cache alone. Returns the replayed extraction and its miss count.
pub async fn warm_then_replay(corpus: &Corpus, transcript: HashMap<String, String>, cache_dir: &Path) -> (Extraction, u64) {
    let template = PromptTemplate::builtin_extraction();
    let cfg = extraction_config();
    let warm = CachedGateway::new(oracle_gateway(transcript), ResponseCache::new(cache_dir), MODEL, 0.0);
    run_extraction(&corpus.docs, &template, &warm, &cfg).await.expect("warm run");
    let replay = CachedGateway::replay_only(ResponseCache::new(cache_dir), MODEL, 0.0);
    let ex = run_extraction(&corpus.docs, &template, &replay, &cfg).await.expect("replay run");
    (ex, replay.misses())
}
