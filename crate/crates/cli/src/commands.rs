//! Subcommand definitions and handlers.

use std::io::Read;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use reportsmith_core::metrics::ProviderError;
use reportsmith_core::report::{json_to_report, report_to_json};
use reportsmith_gateway::prompt::{build_alpaca_messages, build_fewshot_messages, sample_shots, Shot};
use reportsmith_gateway::{generate, GenerationResult, MalformedGeneration};
use reportsmith_harness::{run_eval, synthetic_testset, EvalRunConfig, HarnessError, Suite};
use reportsmith_pipeline::corpus::{run_filter, run_split, run_synth, Corpus, CorpusError};
use reportsmith_pipeline::export::{export_instruction_jsonl, read_jsonl, DatasetMetadata, SplitCounts, METADATA_FILE};
use reportsmith_pipeline::{fetch_fixed_bugs, FetchConfig, FetchError, InstructionExample};

use crate::config::{AppConfig, ResolvedBackend};
use crate::service::{self, score_response, AppState};

#[derive(Debug, Parser)]
#[command(name = "reportsmith", version, about = "Bug-report structuring, scoring and evaluation")]
pub struct Cli {
    /// TOML config file; defaults to $REPORTSMITH_CONFIG, then built-ins.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the CTQRS breakdown of a report (text or report JSON; `-` for stdin).
    Score { file: PathBuf },
    /// Structure a free-form report with a backend and print the report JSON.
    Structure {
        file: PathBuf,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, default_value_t = 0)]
        shots: usize,
        /// Print the full generation record instead of the report.
        #[arg(long)]
        raw: bool,
    },
    /// Fetch fixed bugs from a Bugzilla instance into <corpus>/raw/bugs.jsonl.
    Ingest {
        #[arg(long)]
        base_url: String,
        #[arg(long)]
        since: String,
        #[arg(long, default_value_t = 100)]
        limit: usize,
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
        #[arg(long, default_value_t = 100)]
        page_size: usize,
    },
    /// Filter raw bugs into the accepted set.
    Filter { corpus: PathBuf },
    /// Generate unstructured inputs for the accepted reports.
    Synth {
        corpus: PathBuf,
        #[arg(long)]
        backend: Option<String>,
    },
    /// Split retained examples into train/test/validation.
    Split {
        corpus: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a split as instruction-tuning JSONL with metadata.json beside it.
    Export {
        split: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an evaluation suite and write aggregate.json, rows.csv, confusion.csv.
    Eval {
        #[arg(long)]
        suite: Suite,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long, default_value_t = 0)]
        shots: usize,
        #[arg(long)]
        testset: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "eval-out")]
        out: PathBuf,
    },
    /// Serve the JSON API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
    },
}

/// Exit status 1 for user errors, 2 for provider failures.
#[derive(Debug)]
pub enum CliError {
    User(String),
    Provider(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Provider(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::User(m) | CliError::Provider(m) => m,
        }
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        CliError::Provider(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Provider(p) => p.into(),
            other => CliError::User(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Provider { .. } => CliError::Provider(e.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}

fn user<E: std::fmt::Display>(e: E) -> CliError {
    CliError::User(e.to_string())
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(user)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

/// Exemplars for few-shot prompts.
pub struct ExemplarPool(Vec<(String, Shot)>);

impl ExemplarPool {
    pub fn builtin() -> Self {
        Self(
            synthetic_testset(10)
                .into_iter()
                .map(|c| (c.bug_id.to_string(), Shot { input: c.unstructured, output: c.gold }))
                .collect(),
        )
    }
}

/// One structuring call: Alpaca layout for 0 shots, chat exemplars otherwise.
pub fn structure_text(
    backend: &ResolvedBackend,
    pool: &ExemplarPool,
    text: &str,
    shots: usize,
) -> Result<GenerationResult, ProviderError> {
    let messages = if shots == 0 {
        build_alpaca_messages(text)
    } else {
        let picked: Vec<Shot> = sample_shots(&pool.0, shots, 42, None).into_iter().cloned().collect();
        build_fewshot_messages(&picked, text)
    };
    generate(backend.chat.as_ref(), &messages)
}

/// The CTQRS breakdown JSON for a file's content. Report JSON is scored as
/// is; anything else goes through the section parser.
pub fn score_text(cfg: &AppConfig, text: &str) -> Result<String, CliError> {
    let engine = cfg.engine().map_err(CliError::User)?;
    if text.trim_start().starts_with('{') {
        if let Ok(report) = json_to_report(text) {
            return Ok(engine.score(&report).to_json());
        }
    }
    Ok(score_response(&engine, text).breakdown.get().to_owned())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = AppConfig::discover(cli.config.as_deref()).map_err(CliError::User)?;
    match cli.command {
        Command::Score { file } => {
            println!("{}", score_text(&cfg, &read_input(&file)?)?);
        }
        Command::Structure { file, backend, shots, raw } => {
            let text = read_input(&file)?;
            let backend = cfg.backend(backend.as_deref()).map_err(CliError::User)?;
            let result = structure_text(&backend, &ExemplarPool::builtin(), &text, shots)?;
            if raw {
                println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
            }
            match &result.report {
                Some(r) if !raw => println!("{}", report_to_json(r)),
                Some(_) => {}
                None => {
                    let why = result.parse_error.clone().unwrap_or_default();
                    return Err(CliError::Provider(MalformedGeneration(why).to_string()));
                }
            }
        }
        Command::Ingest { base_url, since, limit, corpus, page_size } => {
            let corpus = Corpus::new(corpus);
            let mut fc = FetchConfig::new(&base_url);
            fc.page_size = page_size;
            fc.cursor_path = Some(corpus.cursor());
            match fetch_fixed_bugs(&fc, &since, limit) {
                Ok(bugs) => {
                    let n = corpus.store_bugs(&bugs)?;
                    eprintln!("fetched {} bugs, corpus holds {n}", bugs.len());
                }
                Err(FetchError::Partial(p)) => {
                    let n = corpus.store_bugs(&p.fetched)?;
                    eprintln!("stored {} bugs before failure (corpus holds {n}); rerun to resume", p.fetched.len());
                    return Err(p.cause.into());
                }
                Err(FetchError::Provider(e)) => return Err(e.into()),
                Err(FetchError::Cursor(e)) => return Err(user(e)),
            }
        }
        Command::Filter { corpus } => {
            let engine = cfg.engine().map_err(CliError::User)?;
            let stats = run_filter(&Corpus::new(corpus), &engine)?;
            println!("{}", serde_json::to_string_pretty(&stats).expect("serializable"));
        }
        Command::Synth { corpus, backend } => {
            let backend = cfg.backend(backend.as_deref()).map_err(CliError::User)?;
            let embedder = cfg.embedder().map_err(CliError::User)?;
            let stats = run_synth(
                &Corpus::new(corpus),
                backend.chat.as_ref(),
                &cfg.synthesis,
                embedder.as_ref(),
                backend.max_concurrency,
            )?;
            println!("{}", serde_json::to_string_pretty(&stats).expect("serializable"));
        }
        Command::Split { corpus, seed } => {
            let mut ratios = cfg.split;
            if let Some(s) = seed {
                ratios.seed = s;
            }
            let counts = run_split(&Corpus::new(corpus), &ratios, &cfg.synthesis)?;
            println!("{}", serde_json::to_string_pretty(&counts).expect("serializable"));
        }
        Command::Export { split, out } => {
            let examples: Vec<InstructionExample> =
                read_jsonl(&split).map_err(|e| CliError::User(format!("{}: {e}", split.display())))?;
            let metadata = split_metadata(&cfg, &split, examples.len())?;
            export_instruction_jsonl(&examples, &out, &metadata)
                .map_err(|e| CliError::User(format!("{}: {e}", out.display())))?;
            eprintln!("wrote {} rows to {}", examples.len(), out.display());
        }
        Command::Eval { suite, backend, shots, testset, seed, out } => {
            let backend = cfg.backend(backend.as_deref()).map_err(CliError::User)?;
            let embedder = cfg.embedder().map_err(CliError::User)?;
            let mut run = EvalRunConfig::new(&backend.name, suite, testset, out);
            run.shots = shots;
            run.seed = seed;
            run.max_concurrency = backend.max_concurrency;
            let agg = run_eval(&run, backend.chat.as_ref(), embedder.as_ref())?;
            println!("{}", serde_json::to_string_pretty(&agg).expect("serializable"));
        }
        Command::Serve { port, bind } => {
            let mut cfg = cfg;
            if let Some(p) = port {
                if p == 0 {
                    return Err(CliError::User("port must be in [1, 65535]".into()));
                }
                cfg.service.port = p;
            }
            if let Some(b) = bind {
                cfg.service.bind = b;
            }
            let addr: SocketAddr = format!("{}:{}", cfg.service.bind, cfg.service.port)
                .parse()
                .map_err(|e| CliError::User(format!("bad bind address: {e}")))?;
            let state = Arc::new(AppState::new(cfg).map_err(CliError::User)?);
            service::serve(state, addr).map_err(user)?;
        }
    }
    Ok(())
}

/// The corpus metadata.json next to the splits directory when present,
/// otherwise one built from the config.
fn split_metadata(cfg: &AppConfig, split: &Path, rows: usize) -> Result<DatasetMetadata, CliError> {
    let candidate = split.parent().and_then(Path::parent).map(|d| d.join(METADATA_FILE));
    if let Some(path) = candidate.filter(|p| p.exists()) {
        let text = std::fs::read_to_string(&path).map_err(user)?;
        return serde_json::from_str(&text).map_err(|e| CliError::User(format!("{}: {e}", path.display())));
    }
    Ok(DatasetMetadata::new(cfg.synthesis, cfg.split, SplitCounts { train: rows, test: 0, validation: 0 }))
}
