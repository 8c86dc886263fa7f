//! Python bindings: documents, the tag parser, extraction runs with a Python
//! callable standing in for the model, and scoring.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use vqa_miner::evaluate::{self, format_table, load_gold, EvalReport};
use vqa_miner::gateway::{self, CachedGateway, CompletionRequest, FnGateway, Gateway, GatewayError, HttpGateway, LlmConfig, LlmUsage, ResponseCache};
use vqa_miner::ingest::{chunk_document, doc_id_from_path, load_mineru_document, DocumentSource, DEFAULT_OVERLAP, DEFAULT_WINDOW};
use vqa_miner::manifest::ChunkRecord;
use vqa_miner::pipeline::{run_extraction, ExtractionConfig};
use vqa_miner::prompting::PromptTemplate;
use vqa_miner::reconstruct::{export_jsonl, load_jsonl, render_markdown, Modality, QaPair};
use vqa_miner::tags::{self, ParseMode};
use vqa_miner::Diagnostic;

const DEFAULT_CACHE_DIR: &str = ".vqa-miner-cache";

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serialize through JSON into plain Python objects.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Document", frozen)]
struct PyDocument {
    inner: DocumentSource,
}

#[pymethods]
impl PyDocument {
    /// Load a MinerU block file. The id defaults to one derived from the path.
    #[staticmethod]
    #[pyo3(signature = (path, doc_id=None, subject="mathematics"))]
    fn load(path: PathBuf, doc_id: Option<String>, subject: &str) -> PyResult<Self> {
        let doc_id = doc_id.unwrap_or_else(|| doc_id_from_path(&path));
        let inner = load_mineru_document(&path, &doc_id, subject).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    #[getter]
    fn doc_id(&self) -> &str {
        &self.inner.doc_id
    }

    #[getter]
    fn subject(&self) -> &str {
        &self.inner.subject
    }

    fn __len__(&self) -> usize {
        self.inner.blocks.len()
    }

    fn blocks(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.blocks)
    }

    /// Block ids of each chunk.
    #[pyo3(signature = (window=DEFAULT_WINDOW, overlap=DEFAULT_OVERLAP))]
    fn chunks(&self, window: usize, overlap: usize) -> PyResult<Vec<Vec<u32>>> {
        let chunks = chunk_document(&self.inner, window, overlap).map_err(value_err)?;
        Ok(chunks.iter().map(|c| c.block_ids.iter().map(|b| b.0).collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Document({:?}, {} blocks)", self.inner.doc_id, self.inner.blocks.len())
    }
}

#[pyclass(name = "QaPair", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyQaPair {
    inner: QaPair,
}

#[pymethods]
impl PyQaPair {
    #[getter]
    fn doc_id(&self) -> &str {
        self.inner.doc_id()
    }

    #[getter]
    fn chapter(&self) -> &str {
        &self.inner.chapter
    }

    #[getter]
    fn label(&self) -> &str {
        &self.inner.label
    }

    #[getter]
    fn answer(&self) -> &str {
        &self.inner.answer
    }

    #[getter]
    fn partial(&self) -> bool {
        self.inner.partial
    }

    #[getter]
    fn modality(&self) -> &'static str {
        match self.inner.modality {
            Modality::TextOnly => "text_only",
            Modality::TextImage => "text_image",
        }
    }

    #[getter]
    fn question_text(&self) -> String {
        self.inner.question_text()
    }

    #[getter]
    fn solution_text(&self) -> String {
        self.inner.solution_text()
    }

    /// `(image_ref, slot)` in reading order.
    #[getter]
    fn images(&self) -> Vec<(String, String)> {
        self.inner.images().map(|(r, slot, _)| (r.to_owned(), slot.to_owned())).collect()
    }

    fn markdown(&self) -> String {
        render_markdown(&self.inner)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("QaPair({:?}, {:?}, {:?})", self.inner.doc_id(), self.inner.chapter, self.inner.label)
    }
}

fn wrap(pairs: &[QaPair]) -> Vec<PyQaPair> {
    pairs.iter().cloned().map(|inner| PyQaPair { inner }).collect()
}

fn unwrap(pairs: &[PyRef<'_, PyQaPair>]) -> Vec<QaPair> {
    pairs.iter().map(|p| p.inner.clone()).collect()
}

#[pyclass(name = "Extraction", frozen)]
struct PyExtraction {
    pairs: Vec<QaPair>,
    diagnostics: Vec<Diagnostic>,
    chunks: Vec<ChunkRecord>,
}

#[pymethods]
impl PyExtraction {
    #[getter]
    fn pairs(&self) -> Vec<PyQaPair> {
        wrap(&self.pairs)
    }

    #[getter]
    fn diagnostics(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.diagnostics)
    }

    #[getter]
    fn chunks(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.chunks)
    }

    #[getter]
    fn failed_chunks(&self) -> usize {
        self.chunks
            .iter()
            .filter(|c| c.status == vqa_miner::manifest::ChunkStatus::GatewayFailed)
            .count()
    }

    fn __repr__(&self) -> String {
        format!("Extraction({} pairs, {} chunks)", self.pairs.len(), self.chunks.len())
    }
}

#[pyclass(name = "Report", frozen)]
struct PyReport {
    inner: EvalReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn text(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.text)
    }

    #[getter]
    fn vision(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.vision)
    }

    fn table(&self) -> String {
        format_table(&self.inner)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Report(text_f1={:.4}, vision_f1={:.4})", self.inner.text.f1, self.inner.vision.f1)
    }
}

#[pyfunction]
fn normalize_label(raw: &str) -> String {
    tags::normalize_label(raw)
}

/// Parse a tagged model reply into `{"chapters": [...], "diagnostics": [...]}`.
#[pyfunction]
#[pyo3(signature = (text, strict=false))]
fn parse_response(py: Python<'_>, text: &str, strict: bool) -> PyResult<Py<PyAny>> {
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let out = tags::parse_response(text, mode).map_err(value_err)?;
    to_py(
        py,
        &serde_json::json!({ "chapters": out.response.chapters, "diagnostics": out.diagnostics }),
    )
}

/// Lenient parse followed by canonical rendering.
#[pyfunction]
fn canonicalize(text: &str) -> PyResult<String> {
    let out = tags::parse_response(text, ParseMode::Lenient).map_err(value_err)?;
    Ok(tags::render_canonical(&out.response))
}

#[pyfunction]
fn f1(precision: f64, recall: f64) -> f64 {
    evaluate::f1(precision, recall)
}

/// `usages` are `(prompt_tokens, completion_tokens)` per request; prices
/// are per 1M tokens.
#[pyfunction]
fn cost_per_question(usages: Vec<(u64, u64)>, price_in: f64, price_out: f64, n_questions: usize) -> PyResult<f64> {
    let usages: Vec<LlmUsage> = usages
        .into_iter()
        .map(|(p, c)| LlmUsage {
            prompt_tokens: p,
            completion_tokens: c,
            ..LlmUsage::default()
        })
        .collect();
    let cfg = LlmConfig {
        price_in,
        price_out,
        ..LlmConfig::default()
    };
    gateway::cost_per_question(&usages, &cfg, n_questions).map_err(value_err)
}

fn python_gateway(respond: Py<PyAny>) -> Arc<dyn Gateway> {
    Arc::new(FnGateway::new(move |req: &CompletionRequest| {
        Python::attach(|py| respond.call1(py, (req.prompt.as_str(),))?.extract::<String>(py))
            .map_err(|e| GatewayError::Protocol(format!("python responder: {e}")))
    }))
}

/// Run extraction over MinerU files. `respond(prompt) -> str` stands in for
/// the model; without it requests go to `base_url` (or only the cache when
/// `replay`). A `cache_dir` records and replays responses.
#[pyfunction]
#[pyo3(signature = (paths, subject="mathematics", respond=None, model=None, base_url=None, cache_dir=None, replay=false, window=DEFAULT_WINDOW, overlap=DEFAULT_OVERLAP, strict=false))]
#[allow(clippy::too_many_arguments)]
fn extract(
    py: Python<'_>,
    paths: Vec<PathBuf>,
    subject: &str,
    respond: Option<Py<PyAny>>,
    model: Option<String>,
    base_url: Option<String>,
    cache_dir: Option<PathBuf>,
    replay: bool,
    window: usize,
    overlap: usize,
    strict: bool,
) -> PyResult<PyExtraction> {
    let mut llm = LlmConfig::default();
    if let Some(m) = model {
        llm.model = m;
    }
    if let Some(u) = base_url {
        llm.base_url = u;
    }
    let docs = paths
        .iter()
        .map(|p| load_mineru_document(p, &doc_id_from_path(p), subject))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    let inner: Option<Arc<dyn Gateway>> = match respond {
        Some(f) => Some(python_gateway(f)),
        None if replay => None,
        None => Some(Arc::new(HttpGateway::from_env(llm.clone()).map_err(value_err)?)),
    };
    let gw: Arc<dyn Gateway> = match (inner, cache_dir, replay) {
        (_, dir, true) => Arc::new(CachedGateway::replay_only(
            ResponseCache::new(dir.unwrap_or_else(|| DEFAULT_CACHE_DIR.into())),
            &llm.model,
            llm.temperature,
        )),
        (Some(g), Some(dir), false) => Arc::new(CachedGateway::new(g, ResponseCache::new(dir), &llm.model, llm.temperature)),
        (Some(g), None, false) => g,
        (None, _, false) => unreachable!("a gateway exists unless replaying"),
    };
    let cfg = ExtractionConfig {
        window,
        overlap,
        mode: if strict { ParseMode::Strict } else { ParseMode::Lenient },
        ..ExtractionConfig::default()
    };
    let template = PromptTemplate::builtin_extraction();
    let ex = py
        .detach(|| {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| e.to_string())?;
            rt.block_on(run_extraction(&docs, &template, &gw, &cfg)).map_err(|e| e.to_string())
        })
        .map_err(PyRuntimeError::new_err)?;
    Ok(PyExtraction {
        pairs: ex.pairs,
        diagnostics: ex.diagnostics,
        chunks: ex.chunks,
    })
}

#[pyfunction]
fn score(pairs: Vec<PyRef<'_, PyQaPair>>, gold_path: PathBuf) -> PyResult<PyReport> {
    let gold = load_gold(&gold_path).map_err(value_err)?;
    Ok(PyReport {
        inner: evaluate::evaluate(&unwrap(&pairs), &gold),
    })
}

#[pyfunction]
fn load_pairs(path: PathBuf) -> PyResult<Vec<PyQaPair>> {
    Ok(wrap(&load_jsonl(&path).map_err(|e| PyIOError::new_err(e.to_string()))?))
}

#[pyfunction]
fn save_pairs(pairs: Vec<PyRef<'_, PyQaPair>>, path: PathBuf) -> PyResult<usize> {
    export_jsonl(&unwrap(&pairs), &path).map_err(|e| PyIOError::new_err(e.to_string()))
}

#[pymodule]
pub fn vqa_miner_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDocument>()?;
    m.add_class::<PyQaPair>()?;
    m.add_class::<PyExtraction>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(normalize_label, m)?)?;
    m.add_function(wrap_pyfunction!(parse_response, m)?)?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(f1, m)?)?;
    m.add_function(wrap_pyfunction!(cost_per_question, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(load_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(save_pairs, m)?)?;
    Ok(())
}
