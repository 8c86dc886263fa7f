#[path = "../../core/tests/common/corpus.rs"]
mod corpus;
#[path = "../../core/tests/common/curation.rs"]
mod curation;

use std::collections::BTreeSet;
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use vqa_miner::evaluate::{evaluate, load_gold, EvalReport};
use vqa_miner::gateway::{CachedGateway, FnGateway, ResponseCache};
use vqa_miner::manifest::RunManifest;
use vqa_miner::pipeline::run_extraction;
use vqa_miner::prompting::PromptTemplate;
use vqa_miner::reconstruct::{export_jsonl, load_jsonl};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vqa-miner"));
    c.env_remove("VQAMINER_MODEL").env_remove("VQAMINER_BASE_URL").env_remove("VQAMINER_API_KEY");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn rt() -> tokio::runtime::Runtime {
    tokio::runtime::Runtime::new().unwrap()
}

fn warmed() -> (corpus::Corpus, tempfile::TempDir) {
    let c = corpus::build();
    let cache = tempfile::tempdir().unwrap();
    let (_, misses) = rt().block_on(corpus::warm_then_replay(&c, c.transcript(&c.pairs), cache.path()));
    assert_eq!(misses, 0);
    (c, cache)
}

fn path_of<'a>(c: &'a corpus::Corpus, doc: &str) -> &'a str {
    let i = c.docs.iter().position(|d| d.doc_id == doc).unwrap();
    s(&c.paths[i])
}

fn extract(c: &corpus::Corpus, cache: &Path, out: &Path, docs: &[&str], subject: &str, extra: &[&str]) -> Output {
    let mut args = vec!["extract"];
    args.extend(docs.iter().map(|d| path_of(c, d)));
    args.extend([
        "--subject",
        subject,
        "--window",
        "10",
        "--overlap",
        "2",
        "--model",
        corpus::MODEL,
        "--cache-dir",
        s(cache),
        "--replay",
        "--out",
        s(out),
    ]);
    args.extend(extra);
    run(&args)
}

fn gold_for(c: &corpus::Corpus, doc: &str, path: &Path) {
    let g = c.gold().restricted_to(doc);
    std::fs::write(path, serde_json::to_string(&g).unwrap()).unwrap();
}

#[test]
fn extract_replays_to_perfect_scores_deterministically() {
    let (c, cache) = warmed();
    let work = tempfile::tempdir().unwrap();
    let (a, b) = (work.path().join("a"), work.path().join("b"));
    for out in [&a, &b] {
        let o = extract(&c, cache.path(), out, &["interleaved"], "calculus", &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    for f in ["pairs.jsonl", "diagnostics.jsonl", "markdown/interleaved.md"] {
        let bytes = std::fs::read(a.join(f)).unwrap();
        assert!(!bytes.is_empty() || f == "diagnostics.jsonl", "{f}");
        assert_eq!(bytes, std::fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let strip = |m: RunManifest| RunManifest {
        run_id: String::new(),
        started_at: String::new(),
        finished_at: String::new(),
        ..m
    };
    let ma = RunManifest::read(&a.join("manifest.json")).unwrap();
    assert_eq!(strip(ma.clone()), strip(RunManifest::read(&b.join("manifest.json")).unwrap()));
    assert_eq!(ma.totals.cache_hits, ma.totals.requests);
    assert_eq!(ma.config["extraction"]["window"], 10);
    for img in ["lim_1_2", "deriv_2_1", "deriv_2_2"] {
        assert!(a.join(format!("markdown/images/{img}.png")).exists(), "{img} not copied");
    }

    let gold = work.path().join("gold.json");
    gold_for(&c, "interleaved", &gold);
    let pairs = load_jsonl(&a.join("pairs.jsonl")).unwrap();
    let r = evaluate(&pairs, &load_gold(&gold).unwrap());
    assert_eq!((r.text.f1, r.vision.f1), (1.0, 1.0));
}

#[test]
fn companion_books_merge_through_the_cli() {
    let (c, cache) = warmed();
    let out = tempfile::tempdir().unwrap();
    let o = extract(&c, cache.path(), out.path(), &["algebra_questions", "algebra_answers"], "abstract algebra", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let pairs = load_jsonl(&out.path().join("pairs.jsonl")).unwrap();
    let want = c.pairs.iter().filter(|p| corpus::Corpus::owner_doc(p) == "algebra_questions").count();
    assert_eq!(pairs.len(), want);
    assert!(pairs.iter().all(|p| !p.partial));
}

#[test]
fn evaluate_prints_table_and_writes_report() {
    let (c, cache) = warmed();
    let work = tempfile::tempdir().unwrap();
    let o = extract(&c, cache.path(), work.path(), &["interleaved"], "calculus", &[]);
    assert_eq!(code(&o), 0);
    let gold = work.path().join("gold.json");
    gold_for(&c, "interleaved", &gold);
    let pred = work.path().join("pairs.jsonl");

    let o = run(&["evaluate", s(&pred), s(&gold)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("Calculus Exercises") && table.contains("1.0000"), "{table}");
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(work.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report.text.f1, 1.0);

    let empty_pred = work.path().join("none.jsonl");
    std::fs::write(&empty_pred, "").unwrap();
    let empty_gold = work.path().join("empty.json");
    std::fs::write(&empty_gold, r#"{"doc_ids":["interleaved"]}"#).unwrap();
    let custom = work.path().join("r.json");
    let o = run(&["evaluate", s(&empty_pred), s(&empty_gold), "--report", s(&custom)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains("undef"));
    assert!(custom.exists());

    let broken = work.path().join("broken.json");
    std::fs::write(&broken, r#"{"gold_pairs": 3}"#).unwrap();
    assert_eq!(code(&run(&["evaluate", s(&pred), s(&broken)])), 2);
    assert_eq!(code(&run(&["evaluate", s(&pred), "/no/such/gold.json"])), 2);
}

#[test]
fn missing_input_is_a_usage_error() {
    let o = run(&["extract", "/definitely/not/here.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("input not found"));
    assert_eq!(code(&run(&["extract"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn strict_mode_surfaces_parse_errors_as_exit_3() {
    let c = corpus::build();
    let cache = tempfile::tempdir().unwrap();
    let junk = FnGateway::new(|_: &vqa_miner::gateway::CompletionRequest| {
        Ok("<chapter><title>0</title> stray words <qa_pair><label>1</label></chapter>".to_owned())
    });
    let warm = CachedGateway::new(std::sync::Arc::new(junk), ResponseCache::new(cache.path()), corpus::MODEL, 0.0);
    let docs = [c.doc("interleaved").clone()];
    rt().block_on(run_extraction(&docs, &PromptTemplate::builtin_extraction(), &warm, &corpus::extraction_config()))
        .unwrap();

    let out = tempfile::tempdir().unwrap();
    let o = extract(&c, cache.path(), out.path(), &["interleaved"], "calculus", &["--strict"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("strict mode"));
    let o = extract(&c, cache.path(), out.path(), &["interleaved"], "calculus", &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn replay_miss_exits_4_with_partial_outputs() {
    let c = corpus::build();
    let empty = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = extract(&c, empty.path(), out.path(), &["interleaved"], "calculus", &[]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let m = RunManifest::read(&out.path().join("manifest.json")).unwrap();
    assert_eq!(m.totals.failed_chunks, m.totals.requests);
    let diags = std::fs::read_to_string(out.path().join("diagnostics.jsonl")).unwrap();
    assert!(diags.contains("gateway_failure"));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let (c, cache) = warmed();
    let work = tempfile::tempdir().unwrap();
    let cfg = work.path().join("vqa.toml");
    std::fs::write(
        &cfg,
        format!(
            "[llm]\nmodel = \"{}\"\ncache_dir = {:?}\n[chunking]\nwindow = 10\noverlap = 2\n",
            corpus::MODEL,
            s(cache.path())
        ),
    )
    .unwrap();
    let out = work.path().join("out");
    let o = run(&["extract", path_of(&c, "interleaved"), "--subject", "calculus", "--config", s(&cfg), "--replay", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // A flag beats the file: another window means other prompts, all misses.
    let o = run(&[
        "extract",
        path_of(&c, "interleaved"),
        "--subject",
        "calculus",
        "--config",
        s(&cfg),
        "--replay",
        "--window",
        "12",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 4);
    // The environment loses to the file.
    let o = bin()
        .args(["extract", path_of(&c, "interleaved"), "--subject", "calculus", "--config", s(&cfg), "--replay", "--out", s(&out)])
        .env("VQAMINER_MODEL", "other-model")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    std::fs::write(&cfg, "[llm]\nmodle = 1\n").unwrap();
    let o = run(&["extract", path_of(&c, "interleaved"), "--config", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&run(&["extract", path_of(&c, "interleaved"), "--prices", "cheap"])), 2);
}

#[test]
fn curate_keeps_the_verifiable_complete_types() {
    let cache = tempfile::tempdir().unwrap();
    rt().block_on(curation::replayed(cache.path()));
    let work = tempfile::tempdir().unwrap();
    let cases = curation::cases();
    let pred = work.path().join("pairs.jsonl");
    export_jsonl(&cases.iter().map(|c| c.pair.clone()).collect::<Vec<_>>(), &pred).unwrap();

    let o = run(&["curate", s(&pred), "--model", "mock-curator", "--cache-dir", s(cache.path()), "--replay"]);
    assert_eq!(code(&o), 2, "difficulty stage without a solver file");

    let out = work.path().join("curated");
    let o = run(&[
        "curate",
        s(&pred),
        "--skip-difficulty",
        "--model",
        "mock-curator",
        "--cache-dir",
        s(cache.path()),
        "--replay",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let labels = |f: &str| -> BTreeSet<String> {
        std::fs::read_to_string(out.join(f))
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["label"].as_str().unwrap().to_owned())
            .collect()
    };
    let kept: BTreeSet<String> = labels("text_only.jsonl").union(&labels("text_image.jsonl")).cloned().collect();
    let want: BTreeSet<String> = cases.iter().filter(|c| c.keep()).map(|c| c.pair.label.clone()).collect();
    assert_eq!(kept, want);
    let records = std::fs::read_to_string(out.join("curation.jsonl")).unwrap();
    assert_eq!(records.lines().count(), cases.len());
    assert!(!records.contains("difficulty"));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

#[test]
fn serve_writes_empty_gold_on_interrupt_and_rejects_busy_port() {
    let work = tempfile::tempdir().unwrap();
    let pred = work.path().join("pairs.jsonl");
    export_jsonl(&curation::cases().into_iter().map(|c| c.pair).collect::<Vec<_>>(), &pred).unwrap();
    let gold = work.path().join("gold.json");

    let busy = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = busy.local_addr().unwrap().port().to_string();
    let o = run(&["serve", s(&pred), "--gold-out", s(&gold), "--port", &port]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    drop(busy);

    let port = free_port();
    let mut child = bin()
        .args(["serve", s(&pred), "--gold-out", s(&gold), "--port", &port.to_string()])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    while TcpStream::connect(("127.0.0.1", port)).is_err() {
        assert!(Instant::now() < deadline, "server never came up");
        std::thread::sleep(Duration::from_millis(50));
    }
    let killed = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    assert!(child.wait().unwrap().success());
    let g = load_gold(&gold).unwrap();
    assert!(g.gold_pairs.is_empty() && g.gold_image_placements.is_empty());
    assert!(work.path().join("gold.json.report.json").exists());
}
