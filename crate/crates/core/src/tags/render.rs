use super::{ExtractionResponse, Title};
use crate::ingest::BlockId;

fn join_ids(ids: &[BlockId]) -> String {
    ids.iter().map(|i| i.0.to_string()).collect::<Vec<_>>().join(",")
}

/// Deterministic re-emission in the reply format the prompt asks for.
pub fn render_canonical(resp: &ExtractionResponse) -> String {
    if resp.is_empty() {
        return "<empty></empty>".to_owned();
    }
    let mut out = String::new();
    for chapter in &resp.chapters {
        let title = match &chapter.title {
            Title::Ids(ids) => join_ids(ids),
            Title::Text(t) => t.clone(),
        };
        out.push_str(&format!("<chapter><title>{title}</title>\n"));
        for p in &chapter.qa_pairs {
            out.push_str(&format!(
                "<qa_pair><label>{}</label><question>{}</question>\n<answer>{}</answer><solution>{}</solution></qa_pair>\n",
                p.label,
                join_ids(&p.question_ids),
                p.answer_text,
                join_ids(&p.solution_ids),
            ));
        }
        out.push_str("</chapter>\n");
    }
    out
}
