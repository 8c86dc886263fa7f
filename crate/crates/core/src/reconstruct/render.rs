use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{QaPair, Segment};
use crate::diagnostics::{Diagnostic, DiagnosticKind};
use crate::ingest::DocumentSource;
use crate::util::write_atomic;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExportError + '_ {
    move |source| ExportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn push_segments(out: &mut String, segments: &[Segment]) {
    if segments.is_empty() {
        out.push_str("*not found*\n");
        return;
    }
    for s in segments {
        match s {
            Segment::Text(t) => out.push_str(t.trim_end()),
            Segment::Image(r) => out.push_str(&format!("![]({r})")),
        }
        out.push_str("\n\n");
    }
    out.truncate(out.trim_end().len());
    out.push('\n');
}

pub fn render_markdown(pair: &QaPair) -> String {
    let mut out = if pair.chapter.is_empty() {
        format!("### {}\n\n", pair.label)
    } else {
        format!("### {} \u{2014} {}\n\n", pair.chapter, pair.label)
    };
    out.push_str("**Question**\n\n");
    push_segments(&mut out, &pair.question);
    out.push_str("\n**Answer**\n\n");
    if pair.answer.is_empty() {
        out.push_str("*not found*\n");
    } else {
        out.push_str(pair.answer.trim_end());
        out.push('\n');
    }
    out.push_str("\n**Solution**\n\n");
    push_segments(&mut out, &pair.solution);
    out
}

pub fn render_document_markdown(doc_id: &str, pairs: &[&QaPair]) -> String {
    let mut out = format!("# {doc_id}\n");
    for p in pairs {
        out.push('\n');
        out.push_str(&render_markdown(p));
    }
    out
}

/// One JSON object per line. Returns the number written.
pub fn export_jsonl(pairs: &[QaPair], path: &Path) -> Result<usize, ExportError> {
    let mut buf = String::new();
    for p in pairs {
        buf.push_str(&serde_json::to_string(p).expect("QaPair serializes"));
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes()).map_err(io_err(path))?;
    Ok(pairs.len())
}

pub fn load_jsonl(path: &Path) -> Result<Vec<QaPair>, ExportError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let pair = serde_json::from_str(&line).map_err(|e| ExportError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(pair);
    }
    Ok(out)
}

/// Write `{doc_id}.md` per document under `dir` and copy every referenced
/// image next to it at its original relative path.
pub fn write_markdown_bundle(
    pairs: &[QaPair],
    docs: &[DocumentSource],
    dir: &Path,
) -> Result<Vec<Diagnostic>, ExportError> {
    let mut order: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    let mut grouped: HashMap<String, Vec<&QaPair>> = HashMap::new();
    for p in pairs {
        let doc_id = p.doc_id().to_owned();
        if !order.contains(&doc_id) {
            order.push(doc_id.clone());
        }
        grouped.entry(doc_id).or_default().push(p);
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for doc_id in &order {
        let body = render_document_markdown(doc_id, grouped.get(doc_id).map(Vec::as_slice).unwrap_or(&[]));
        let path = dir.join(format!("{doc_id}.md"));
        write_atomic(&path, body.as_bytes()).map_err(io_err(&path))?;
    }

    let base_dirs: HashMap<&str, &Path> = docs.iter().map(|d| (d.doc_id.as_str(), d.base_dir())).collect();
    let mut copied: HashMap<String, PathBuf> = HashMap::new();
    let mut diagnostics = Vec::new();
    for p in pairs {
        for (image_ref, _, block) in p.images() {
            let doc_id = block.map(|b| b.doc_id.as_str()).unwrap_or(p.doc_id());
            let Some(base) = base_dirs.get(doc_id) else {
                continue;
            };
            let src = base.join(image_ref);
            if let Some(prev) = copied.get(image_ref) {
                if *prev != src {
                    diagnostics.push(Diagnostic::new(
                        DiagnosticKind::AssetCollision,
                        format!("{image_ref}: {} and {} share a path; kept the first", prev.display(), src.display()),
                    ));
                }
                continue;
            }
            let dest = dir.join(image_ref);
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            match std::fs::copy(&src, &dest) {
                Ok(_) => {
                    copied.insert(image_ref.to_owned(), src);
                }
                Err(e) => diagnostics.push(Diagnostic::new(
                    DiagnosticKind::MissingAsset,
                    format!("{}: {e}", src.display()),
                )),
            }
        }
    }
    Ok(diagnostics)
}
