//! Generators shared by the property tests and the acceptance run.
#![allow(dead_code)]

use proptest::prelude::*;
use vqa_miner::ingest::BlockId;
use vqa_miner::reconstruct::{BlockRef, Modality, Provenance, QaPair, Segment, SourceRef};
use vqa_miner::tags::{normalize_label, Chapter, ExtractionResponse, RawQaPair, Title};

pub fn id_list() -> impl Strategy<Value = Vec<BlockId>> {
    prop::collection::btree_set(0u32..400, 0..5).prop_map(|s| s.into_iter().map(BlockId).collect())
}

pub fn label() -> impl Strategy<Value = String> {
    ("(Example |Exercise |Problem |习题 )?", "[0-9]{1,3}|[IVX]{1,4}|[0-9]\\.[0-9]{1,2}|[a-z]", "\\.?")
        .prop_map(|(p, n, dot)| normalize_label(&format!("{p}{n}{dot}")))
}

pub fn pair() -> impl Strategy<Value = RawQaPair> {
    (label(), id_list(), "[a-z0-9 ^+=\\\\{}()<&$.,]{0,16}", id_list())
        .prop_map(|(label, question_ids, answer, solution_ids)| RawQaPair {
            label,
            question_ids,
            answer_text: answer.trim().to_owned(),
            solution_ids,
        })
        .prop_filter("blank pairs are dropped by design", |p| !p.is_blank())
}

pub fn title() -> impl Strategy<Value = Title> {
    prop_oneof![
        id_list().prop_map(Title::Ids),
        "(Chapter|Section|第[一二三]章) [A-Za-z]{1,8}( [0-9]{1,2})?".prop_map(Title::Text),
    ]
}

pub fn response() -> impl Strategy<Value = ExtractionResponse> {
    prop::collection::vec(
        (title(), prop::collection::vec(pair(), 0..4)).prop_map(|(title, qa_pairs)| Chapter { title, qa_pairs }),
        0..4,
    )
    .prop_map(|chapters| ExtractionResponse { chapters })
}

pub fn part(doc: &str, ids: &[(u32, bool)]) -> (Vec<Segment>, Vec<BlockRef>) {
    ids.iter()
        .map(|&(id, image)| {
            let seg = if image {
                Segment::Image(format!("images/{doc}_{id}.png"))
            } else {
                Segment::Text(format!("{doc} block {id}"))
            };
            (
                seg,
                BlockRef {
                    doc_id: doc.into(),
                    id: BlockId(id),
                },
            )
        })
        .unzip()
}

pub fn make(doc: &str, chunk: usize, chapter: &str, label: &str, q: &[(u32, bool)], answer: &str, s: &[(u32, bool)]) -> QaPair {
    let (question, question_blocks) = part(doc, q);
    let (solution, solution_blocks) = part(doc, s);
    let mut cited: Vec<BlockId> = question_blocks.iter().chain(&solution_blocks).map(|b| b.id).collect();
    cited.sort();
    let modality = if question.iter().chain(&solution).any(Segment::is_image) {
        Modality::TextImage
    } else {
        Modality::TextOnly
    };
    QaPair {
        chapter: chapter.into(),
        label: label.into(),
        partial: question.is_empty() || (answer.is_empty() && solution.is_empty()),
        question,
        answer: answer.into(),
        solution,
        modality,
        provenance: Provenance {
            sources: vec![SourceRef {
                doc_id: doc.into(),
                chunk_index: chunk,
                block_ids: cited,
            }],
            question_blocks,
            solution_blocks,
            title_blocks: vec![],
        },
    }
}

pub fn canonical(mut pairs: Vec<QaPair>) -> Vec<String> {
    let mut out: Vec<String> = pairs
        .drain(..)
        .map(|mut p| {
            p.provenance.sources.clear();
            serde_json::to_string(&p).unwrap()
        })
        .collect();
    out.sort();
    out
}

/// Pairs over a few documents with question and answer halves.
pub fn fragments() -> impl Strategy<Value = Vec<QaPair>> {
    let one = (
        prop::sample::select(vec!["a", "b", "c"]),
        0usize..3,
        prop::sample::select(vec!["I", "II"]),
        prop::sample::select(vec!["1", "2", "3"]),
        prop::collection::vec((0u32..30, any::<bool>()), 0..3),
        prop::sample::select(vec!["", "5"]),
        prop::collection::vec((30u32..60, any::<bool>()), 0..3),
    )
        .prop_map(|(doc, chunk, ch, label, q, ans, s)| make(doc, chunk, ch, label, &q, ans, &s))
        .prop_filter("blank", |p| !(p.question.is_empty() && p.solution.is_empty() && p.answer.is_empty()));
    prop::collection::vec(one, 0..14)
}

/// Distinct keys; each question in doc `q`, its answer in doc `a`.
pub fn unambiguous() -> impl Strategy<Value = Vec<QaPair>> {
    prop::collection::btree_set((0u8..3, 0u8..6), 1..8).prop_map(|keys| {
        let mut out = Vec::new();
        for (i, (ch, label)) in keys.into_iter().enumerate() {
            let (ch, label) = (format!("ch{ch}"), format!("{label}"));
            let id = i as u32 * 2;
            out.push(make("q", 0, &ch, &label, &[(id, i % 3 == 0), (id + 1, false)], "", &[]));
            out.push(make("a", 0, &ch, &label, &[], "v", &[(id, i % 2 == 0)]));
        }
        out
    })
}

