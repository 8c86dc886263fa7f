use std::path::Path;

use super::{EvalReport, ModalityScore};
use crate::util::write_atomic;

const HEADER: [&str; 8] = ["Document", "Type", "Layout", "Modality", "#Samples", "Precision", "Recall", "F1"];

fn fraction(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undef".to_owned())
}

fn row(doc: &str, kind: &str, layout: &str, modality: &str, s: &ModalityScore) -> [String; 8] {
    [
        doc.to_owned(),
        kind.to_owned(),
        layout.to_owned(),
        modality.to_owned(),
        s.samples.to_string(),
        fraction(s.precision),
        fraction(s.recall),
        format!("{:.4}", s.f1),
    ]
}

/// Plain-text table, one text row and one vision row per document.
pub fn format_table(report: &EvalReport) -> String {
    let mut rows: Vec<[String; 8]> = vec![HEADER.map(str::to_owned)];
    for d in &report.per_document {
        let name = d.title.as_deref().unwrap_or(&d.doc_id);
        let kind = d.pattern_type.as_deref().unwrap_or("-");
        let layout = d.layout.as_deref().unwrap_or("-");
        rows.push(row(name, kind, layout, "text", &d.text));
        rows.push(row(name, kind, layout, "vision", &d.vision));
    }
    let mut widths = [0usize; 8];
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for (i, r) in rows.iter().enumerate() {
        let cells: Vec<String> = r
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(col, (cell, w))| {
                let pad = w - cell.chars().count();
                if col >= 4 {
                    format!("{}{cell}", " ".repeat(pad))
                } else {
                    format!("{cell}{}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

pub fn write_report_json(report: &EvalReport, path: &Path) -> std::io::Result<()> {
    let mut body = serde_json::to_string_pretty(report).expect("report serializes");
    body.push('\n');
    write_atomic(path, body.as_bytes())
}
