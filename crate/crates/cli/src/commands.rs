use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Utc;
use serde::Serialize;
use vqa_miner::curate::{curate as run_curation, CurateError, CurationPrompts, SolverResults};
use vqa_miner::evaluate::{evaluate as score, format_table, load_gold, write_report_json};
use vqa_miner::gateway::{cost_per_question, total_cost, CachedGateway, HttpGateway, ResponseCache};
use vqa_miner::ingest::{doc_id_from_path, load_with_diagnostics};
use vqa_miner::manifest::{InputRecord, PromptInfo, RunManifest, Totals};
use vqa_miner::pipeline::{run_extraction, PipelineError};
use vqa_miner::prompting::{PromptTemplate, PROMPT_ROLE};
use vqa_miner::reconstruct::{export_jsonl, load_jsonl, write_markdown_bundle, QaPair};
use vqa_miner::review::{ReviewServer, ServeConfig};
use vqa_miner::Diagnostic;

use crate::config::Settings;
use crate::Failure;

pub struct ExtractArgs {
    pub inputs: Vec<PathBuf>,
    pub subject: String,
    pub out: PathBuf,
    pub prompt: Option<PathBuf>,
    pub replay: bool,
}

pub struct CurateArgs {
    pub pred: PathBuf,
    pub solver: Option<PathBuf>,
    pub out: PathBuf,
    pub prompts: Option<PathBuf>,
    pub replay: bool,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::usage(e.to_string())
}

fn require(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::usage(format!("input not found: {}", path.display())))
    }
}

fn gateway(s: &Settings, replay: bool) -> Result<CachedGateway, Failure> {
    s.llm.validate().map_err(usage)?;
    let cache = ResponseCache::new(&s.cache_dir);
    if replay {
        return Ok(CachedGateway::replay_only(cache, &s.llm.model, s.llm.temperature));
    }
    let http = HttpGateway::from_env(s.llm.clone()).map_err(usage)?;
    Ok(CachedGateway::new(Arc::new(http), cache, &s.llm.model, s.llm.temperature))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), Failure> {
    let body: String = items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect();
    std::fs::write(path, body).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_pairs(path: &Path) -> Result<Vec<QaPair>, Failure> {
    require(path)?;
    load_jsonl(path).map_err(usage)
}

pub async fn extract(a: &ExtractArgs, s: &Settings) -> Result<(), Failure> {
    for p in &a.inputs {
        require(p)?;
    }
    let mut docs = Vec::with_capacity(a.inputs.len());
    let mut diagnostics: Vec<Diagnostic> = Vec::new();
    let mut seen = HashSet::new();
    for p in &a.inputs {
        let doc_id = doc_id_from_path(p);
        if !seen.insert(doc_id.clone()) {
            return Err(Failure::usage(format!("duplicate document id {doc_id:?} ({})", p.display())));
        }
        let (doc, warnings) = load_with_diagnostics(p, &doc_id, &a.subject).map_err(usage)?;
        diagnostics.extend(warnings);
        docs.push(doc);
    }
    let template = match &a.prompt {
        Some(p) => PromptTemplate::load_extraction(p).map_err(usage)?,
        None => PromptTemplate::builtin_extraction(),
    };
    let gw = gateway(s, a.replay)?;

    let started = Utc::now();
    let ex = run_extraction(&docs, &template, &gw, &s.extraction)
        .await
        .map_err(|e| match e {
            PipelineError::Parse { .. } | PipelineError::Validation(_) => Failure::parse(format!("strict mode: {e}")),
            other => usage(other),
        })?;
    diagnostics.extend(ex.diagnostics.iter().cloned());

    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e: std::io::Error| Failure::usage(format!("{}: {e}", path.display()))
    };
    std::fs::create_dir_all(&a.out).map_err(io(&a.out))?;
    export_jsonl(&ex.pairs, &a.out.join("pairs.jsonl")).map_err(usage)?;
    diagnostics.extend(write_markdown_bundle(&ex.pairs, &docs, &a.out.join("markdown")).map_err(usage)?);
    write_jsonl(&a.out.join("diagnostics.jsonl"), &diagnostics)?;

    let usages = ex.usages();
    let failed = ex.failed_chunks();
    let totals = Totals {
        requests: ex.chunks.len(),
        cache_hits: ex.chunks.iter().filter(|c| c.cached).count(),
        failed_chunks: failed,
        prompt_tokens: usages.iter().map(|u| u.prompt_tokens).sum(),
        completion_tokens: usages.iter().map(|u| u.completion_tokens).sum(),
        pairs: ex.pairs.len(),
        questions: ex.question_count(),
        cost_usd: total_cost(&usages, s.llm.price_in, s.llm.price_out),
        cost_per_question: cost_per_question(&usages, &s.llm, ex.question_count()).ok(),
    };
    let manifest = RunManifest {
        run_id: RunManifest::new_run_id(started),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_at: RunManifest::timestamp(started),
        finished_at: RunManifest::timestamp(Utc::now()),
        config: serde_json::json!({
            "llm": s.llm,
            "extraction": s.extraction,
            "cache_dir": s.cache_dir,
            "replay": a.replay,
            "subject": a.subject,
        }),
        prompt: PromptInfo {
            name: template.name().to_owned(),
            sha256: template.sha256().to_owned(),
            role: PROMPT_ROLE.to_owned(),
        },
        inputs: a
            .inputs
            .iter()
            .zip(&docs)
            .zip(&ex.chunk_counts)
            .map(|((p, d), &chunks)| InputRecord {
                doc_id: d.doc_id.clone(),
                path: p.display().to_string(),
                blocks: d.blocks.len(),
                chunks,
            })
            .collect(),
        chunks: ex.chunks.clone(),
        totals,
    };
    let manifest_path = a.out.join("manifest.json");
    manifest.write(&manifest_path).map_err(io(&manifest_path))?;

    println!(
        "{} pairs ({} with a question) from {} document(s); {} chunk(s), {} from cache, {} failed; wrote {}",
        ex.pairs.len(),
        ex.question_count(),
        docs.len(),
        ex.chunks.len(),
        manifest.totals.cache_hits,
        failed,
        a.out.display()
    );
    if failed > 0 {
        return Err(Failure::gateway(format!(
            "{failed} chunk(s) failed at the gateway; outputs are partial, see diagnostics.jsonl"
        )));
    }
    Ok(())
}

pub fn evaluate(pred: &Path, gold: &Path, report: Option<&Path>) -> Result<(), Failure> {
    let pairs = load_pairs(pred)?;
    require(gold)?;
    let gold = load_gold(gold).map_err(usage)?;
    let r = score(&pairs, &gold);
    print!("{}", format_table(&r));
    let out = report.map(Path::to_path_buf).unwrap_or_else(|| {
        pred.parent().unwrap_or(Path::new(".")).join("report.json")
    });
    write_report_json(&r, &out).map_err(|e| Failure::usage(format!("{}: {e}", out.display())))
}

pub async fn curate(a: &CurateArgs, s: &Settings) -> Result<(), Failure> {
    let pairs = load_pairs(&a.pred)?;
    if !s.curate.skip_difficulty && a.solver.is_none() {
        return Err(Failure::usage("the difficulty stage needs --solver (or pass --skip-difficulty)"));
    }
    let solver = match &a.solver {
        Some(p) => {
            require(p)?;
            Some(SolverResults::load(p).map_err(usage)?)
        }
        None => None,
    };
    let prompts = match &a.prompts {
        Some(dir) => CurationPrompts::from_dir(dir).map_err(usage)?,
        None => CurationPrompts::default(),
    };
    let gw = gateway(s, a.replay)?;
    let c = run_curation(&pairs, &gw, &prompts, &s.curate, solver.as_ref())
        .await
        .map_err(|e| match e {
            CurateError::Gateway { .. } => Failure::gateway(e.to_string()),
            other => usage(other),
        })?;
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::usage(format!("{}: {e}", a.out.display())))?;
    let (text_only, text_image) = vqa_miner::curate::write_curation(&a.out, &pairs, &c).map_err(usage)?;
    write_jsonl(&a.out.join("diagnostics.jsonl"), &c.diagnostics)?;
    println!(
        "kept {} of {} pairs: {text_only} text-only, {text_image} text-image; wrote {}",
        text_only + text_image,
        pairs.len(),
        a.out.display()
    );
    Ok(())
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    {
        let mut term = match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(s) => s,
            Err(_) => return ctrl_c.await,
        };
        tokio::select! {
            _ = ctrl_c => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    ctrl_c.await;
}

pub async fn serve(
    pred: &Path,
    gold_out: PathBuf,
    port: u16,
    ui_dir: Option<PathBuf>,
    assets_dir: Option<PathBuf>,
) -> Result<(), Failure> {
    let pairs = load_pairs(pred)?;
    let mut cfg = ServeConfig::new(gold_out, port);
    cfg.ui_dir = ui_dir;
    cfg.assets_dir = assets_dir.or_else(|| {
        let bundle = pred.parent().unwrap_or(Path::new(".")).join("markdown");
        bundle.is_dir().then_some(bundle)
    });
    let (gold_path, report_path) = (cfg.gold_out.clone(), cfg.report_out.clone());
    let server = ReviewServer::bind(pairs, cfg).await.map_err(usage)?;
    println!("reviewing on http://{}", server.local_addr());
    let summary = server.run(shutdown_signal()).await.map_err(usage)?;
    println!(
        "wrote {} ({} judged pairs) and {}",
        gold_path.display(),
        summary.gold.gold_pairs.len(),
        report_path.display()
    );
    Ok(())
}
