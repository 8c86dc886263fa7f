//! `vqa-miner extract|evaluate|curate|serve`.
//!
//! Exit codes: 0 success, 2 usage or I/O, 3 strict-mode parse error,
//! 4 gateway gave up on at least one request.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_prices, FileConfig, Overrides, Settings};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_GATEWAY: u8 = 4;

/// A categorized failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }

    pub fn gateway(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_GATEWAY,
            message: message.into(),
        }
    }
}

#[derive(Parser)]
#[command(name = "vqa-miner", version, about = "Mine QA and visual-QA pairs from MinerU block JSON")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct LlmFlags {
    /// TOML file with [llm], [chunking] and [curate] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    base_url: Option<String>,
    /// Prices per 1M input and output tokens.
    #[arg(long, value_name = "IN,OUT", value_parser = parse_prices)]
    prices: Option<(f64, f64)>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Serve every request from the cache; a miss is a gateway failure.
    #[arg(long)]
    replay: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Turn documents into reconstructed pairs.
    Extract {
        /// MinerU block files (`content_list.json` or `*_content_list.json`).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "mathematics")]
        subject: String,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
        /// Extraction prompt template replacing the built-in one.
        #[arg(long)]
        prompt: Option<PathBuf>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        overlap: Option<usize>,
        /// Fail on the first irregular reply instead of recovering.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        llm: LlmFlags,
    },
    /// Score predictions against a gold file.
    Evaluate {
        pred: PathBuf,
        gold: PathBuf,
        /// Defaults to `report.json` next to the predictions.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the curation stages over extracted pairs.
    Curate {
        pred: PathBuf,
        /// JSONL of per-pair solver outcomes.
        #[arg(long)]
        solver: Option<PathBuf>,
        #[arg(long)]
        skip_difficulty: bool,
        #[arg(long, short, default_value = "curated")]
        out: PathBuf,
        /// Directory of prompt overrides named like the built-ins.
        #[arg(long)]
        prompts: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmFlags,
    },
    /// Serve the review API until interrupted.
    Serve {
        pred: PathBuf,
        #[arg(long, default_value = "gold.json")]
        gold_out: PathBuf,
        #[arg(long, default_value_t = vqa_miner::review::DEFAULT_PORT)]
        port: u16,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        /// Defaults to the `markdown/` bundle next to the predictions.
        #[arg(long)]
        assets_dir: Option<PathBuf>,
    },
}

fn settings(llm: &LlmFlags, mut flags: Overrides) -> Result<Settings, Failure> {
    let file = llm.config.as_deref().map(FileConfig::load).transpose()?;
    flags.model.clone_from(&llm.model);
    flags.base_url.clone_from(&llm.base_url);
    flags.prices = llm.prices;
    flags.cache_dir.clone_from(&llm.cache_dir);
    Ok(Settings::resolve(file.as_ref(), |k| std::env::var(k).ok(), &flags))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::usage(format!("runtime: {e}")))?;
    match cli.command {
        Command::Extract {
            inputs,
            subject,
            out,
            prompt,
            window,
            overlap,
            strict,
            llm,
        } => {
            let s = settings(
                &llm,
                Overrides {
                    window,
                    overlap,
                    strict,
                    ..Overrides::default()
                },
            )?;
            let args = commands::ExtractArgs {
                inputs,
                subject,
                out,
                prompt,
                replay: llm.replay,
            };
            rt.block_on(commands::extract(&args, &s))
        }
        Command::Evaluate { pred, gold, report } => commands::evaluate(&pred, &gold, report.as_deref()),
        Command::Curate {
            pred,
            solver,
            skip_difficulty,
            out,
            prompts,
            llm,
        } => {
            let s = settings(
                &llm,
                Overrides {
                    skip_difficulty,
                    ..Overrides::default()
                },
            )?;
            let args = commands::CurateArgs {
                pred,
                solver,
                out,
                prompts,
                replay: llm.replay,
            };
            rt.block_on(commands::curate(&args, &s))
        }
        Command::Serve {
            pred,
            gold_out,
            port,
            ui_dir,
            assets_dir,
        } => rt.block_on(commands::serve(&pred, gold_out, port, ui_dir, assets_dir)),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("VQAMINER_LOG").unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
