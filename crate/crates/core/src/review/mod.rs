//! HTTP backend for manual review: browse pairs, judge text pairing and
//! image placement per pair, and watch the live report. Judgments go to an
//! append-only journal replayed on start; on shutdown they are written out
//! as a gold file plus the report.

mod store;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::services::ServeDir;

use crate::evaluate::{write_report_json, EvalReport, GoldAnnotation};
use crate::reconstruct::{BlockRef, Modality, QaPair, Segment};
use crate::util::write_atomic;

pub use store::{review_key, Judgment, JudgmentRequest, Store, SubmitError};

pub const DEFAULT_PORT: u16 = 7341;
pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 1000;

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub addr: SocketAddr,
    pub gold_out: PathBuf,
    pub report_out: PathBuf,
    pub journal: PathBuf,
    /// Built UI to serve at `/`; a placeholder page otherwise.
    pub ui_dir: Option<PathBuf>,
    /// Directory `image_ref` paths resolve against, served at `/assets/`.
    pub assets_dir: Option<PathBuf>,
}

impl ServeConfig {
    pub fn new(gold_out: impl Into<PathBuf>, port: u16) -> Self {
        let gold_out = gold_out.into();
        let journal = append_ext(&gold_out, "journal.jsonl");
        let report_out = append_ext(&gold_out, "report.json");
        Self {
            addr: SocketAddr::from(([127, 0, 0, 1], port)),
            gold_out,
            report_out,
            journal,
            ui_dir: None,
            assets_dir: None,
        }
    }
}

fn append_ext(path: &std::path::Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("journal {path}: {source}")]
    Journal {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("server: {0}")]
    Serve(std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub key: String,
    pub doc_id: String,
    pub chapter: String,
    pub label: String,
    pub modality: Modality,
    pub partial: bool,
    pub images: usize,
    pub judged: bool,
    pub version: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairPage {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<PairSummary>,
}

/// A source block as cited by the pair, for the side-by-side view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceBlock {
    pub role: String,
    #[serde(flatten)]
    pub block: BlockRef,
    pub segment: Segment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDetail {
    pub key: String,
    pub pair: QaPair,
    pub image_urls: Vec<String>,
    pub blocks: Vec<SourceBlock>,
    pub judgment: Option<Judgment>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stored {
    pub key: String,
    pub version: u64,
}

#[derive(Debug, Deserialize)]
struct Paging {
    offset: Option<usize>,
    limit: Option<usize>,
}

type Shared = Arc<Store>;

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn list_pairs(State(store): State<Shared>, Query(q): Query<Paging>) -> Response {
    let offset = q.offset.unwrap_or(0);
    let limit = q.limit.unwrap_or(DEFAULT_PAGE);
    if limit > MAX_PAGE {
        return error(StatusCode::BAD_REQUEST, format!("limit must be at most {MAX_PAGE}"));
    }
    let judgments = store.judgments();
    let items = store
        .pairs()
        .skip(offset)
        .take(limit)
        .map(|(key, p)| {
            let j = judgments.get(key);
            PairSummary {
                key: key.to_owned(),
                doc_id: p.doc_id().to_owned(),
                chapter: p.chapter.clone(),
                label: p.label.clone(),
                modality: p.modality,
                partial: p.partial,
                images: p.images().count(),
                judged: j.is_some(),
                version: j.map_or(0, |j| j.version),
            }
        })
        .collect();
    Json(PairPage {
        total: store.len(),
        offset,
        limit,
        items,
    })
    .into_response()
}

fn detail(key: &str, p: &QaPair, judgment: Option<Judgment>) -> PairDetail {
    let mut blocks = Vec::new();
    for (role, segments, refs) in [
        ("question", &p.question, &p.provenance.question_blocks),
        ("solution", &p.solution, &p.provenance.solution_blocks),
    ] {
        for (segment, block) in segments.iter().zip(refs) {
            blocks.push(SourceBlock {
                role: role.to_owned(),
                block: block.clone(),
                segment: segment.clone(),
            });
        }
    }
    PairDetail {
        key: key.to_owned(),
        pair: p.clone(),
        image_urls: p.images().map(|(r, _, _)| format!("/assets/{r}")).collect(),
        blocks,
        judgment,
    }
}

async fn get_pair(State(store): State<Shared>, UrlPath(key): UrlPath<String>) -> Response {
    match store.get(&key) {
        Some(p) => Json(detail(&key, p, store.judgment(&key))).into_response(),
        None => error(StatusCode::NOT_FOUND, format!("no pair {key}")),
    }
}

async fn post_judgment(
    State(store): State<Shared>,
    UrlPath(key): UrlPath<String>,
    Json(req): Json<JudgmentRequest>,
) -> Response {
    match store.submit(&key, req) {
        Ok(version) => Json(Stored { key, version }).into_response(),
        Err(SubmitError::UnknownPair) => error(StatusCode::NOT_FOUND, format!("no pair {key}")),
        Err(SubmitError::Stale { current }) => (
            StatusCode::CONFLICT,
            Json(serde_json::json!({ "error": "stale version", "current_version": current })),
        )
            .into_response(),
        Err(SubmitError::Invalid(m)) => error(StatusCode::BAD_REQUEST, m),
        Err(SubmitError::Journal(m)) => error(StatusCode::INTERNAL_SERVER_ERROR, m),
    }
}

async fn get_report(State(store): State<Shared>) -> Json<EvalReport> {
    Json(store.report())
}

const PLACEHOLDER: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>vqa-miner review</title></head>\n<body><h1>vqa-miner review</h1>\n<p>No UI bundle configured. The JSON API is live:</p>\n<ul><li><a href=\"/pairs\">/pairs</a></li><li><a href=\"/report\">/report</a></li></ul>\n</body></html>\n";

pub fn router(store: Shared, cfg: &ServeConfig) -> Router {
    let mut app = Router::new()
        .route("/pairs", get(list_pairs))
        .route("/pairs/{key}", get(get_pair))
        .route("/pairs/{key}/judgment", post(post_judgment))
        .route("/report", get(get_report));
    if let Some(dir) = &cfg.assets_dir {
        app = app.nest_service("/assets", ServeDir::new(dir));
    }
    let app = match &cfg.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(|| async { Html(PLACEHOLDER) })),
    };
    app.with_state(store)
}

/// What was written on shutdown.
#[derive(Clone, Debug, PartialEq)]
pub struct ShutdownSummary {
    pub gold: GoldAnnotation,
    pub report: EvalReport,
}

/// A bound, not yet running, review server.
pub struct ReviewServer {
    listener: tokio::net::TcpListener,
    store: Shared,
    cfg: ServeConfig,
}

impl ReviewServer {
    pub async fn bind(pairs: Vec<QaPair>, cfg: ServeConfig) -> Result<Self, ReviewError> {
        let store = Store::open(pairs, Some(&cfg.journal)).map_err(|source| ReviewError::Journal {
            path: cfg.journal.clone(),
            source,
        })?;
        let listener = tokio::net::TcpListener::bind(cfg.addr)
            .await
            .map_err(|source| ReviewError::Bind { addr: cfg.addr, source })?;
        Ok(Self {
            listener,
            store: Arc::new(store),
            cfg,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound socket has an address")
    }

    pub fn store(&self) -> Shared {
        self.store.clone()
    }

    /// Serve until `shutdown` resolves, then write the gold file and report.
    pub async fn run(self, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<ShutdownSummary, ReviewError> {
        let app = router(self.store.clone(), &self.cfg);
        axum::serve(self.listener, app)
            .with_graceful_shutdown(shutdown)
            .await
            .map_err(ReviewError::Serve)?;

        let gold = self.store.to_gold();
        let report = self.store.report();
        let out = |path: &PathBuf| {
            let path = path.clone();
            move |source| ReviewError::Output { path, source }
        };
        let mut body = serde_json::to_string_pretty(&gold).expect("gold serializes");
        body.push('\n');
        write_atomic(&self.cfg.gold_out, body.as_bytes()).map_err(out(&self.cfg.gold_out))?;
        write_report_json(&report, &self.cfg.report_out).map_err(out(&self.cfg.report_out))?;
        Ok(ShutdownSummary { gold, report })
    }
}
