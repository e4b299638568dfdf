use std::io::{BufRead, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use groundflow_core::corpus::fetch::{download_all, fetch_filings, DateWindow, SourceClient, SourceConfig};
use groundflow_core::corpus::ReportStore;
use groundflow_core::dataset::{self, Tier};
use groundflow_core::evaluator::{render_table, run_bench, run_tiers, BenchResult};
use groundflow_core::fixtures::{DATASET_PER_TIER, DATASET_SEED};
use groundflow_core::{Corpus, LectureConfig, LectureVariant, SessionState, WorkflowDraft};

use crate::app::App;
use crate::config::Config;
use crate::server::{self, AppState};
use crate::UsageError;

pub const DEFAULT_CONFIG: &str = "groundflow.toml";

#[derive(Debug, Parser)]
#[command(name = "groundflow", version, about = "API-grounded workflow generation over N-CEN fund reports")]
pub struct Cli {
    /// Configuration file; `groundflow.toml` in the working directory is used when present.
    #[arg(long, short, global = true, env = "GROUNDFLOW_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download N-CEN filings from the configured source into a corpus directory.
    Ingest {
        /// Base URL or local mirror directory; overrides `source.base_url`.
        #[arg(long)]
        source: Option<String>,
        /// Requests per second; overrides `source.rate_limit`.
        #[arg(long)]
        rate: Option<u32>,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
        /// Defaults to `corpus_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Generate the three-tier question set from the corpus.
    BuildDataset {
        #[arg(long, default_value_t = DATASET_PER_TIER)]
        per_tier: usize,
        #[arg(long, default_value_t = DATASET_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ask one question and refine the generated workflow interactively.
    Ask {
        #[arg(long, short)]
        question: Option<String>,
        /// Approve the first draft without a feedback round.
        #[arg(long)]
        no_feedback: bool,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Score methods on a question set and print the accuracy table.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "groundflow,nct,ba,ncp")]
        methods: Vec<String>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Write the results as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tier: Option<String>,
    },
    /// The context-retrieval comparison method.
    Baseline {
        #[command(subcommand)]
        command: BaselineCommand,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BaselineCommand {
    /// Embed every fund block and save the index.
    BuildIndex {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrieve the closest blocks for a question and ask the model.
    Ask {
        question: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
    },
}

pub fn load_config(path: Option<&std::path::Path>) -> Result<Config> {
    let config = match path {
        Some(p) => Config::load(p)?,
        None if std::path::Path::new(DEFAULT_CONFIG).exists() => Config::load(std::path::Path::new(DEFAULT_CONFIG))?,
        None => Config::default(),
    };
    Ok(config.apply_env())
}

pub fn run(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { source, rate, from, to, out: dir, workers } => {
            let mut config = config;
            if let Some(s) = source {
                config.source.base_url = s;
            }
            if let Some(r) = rate {
                if r == 0 {
                    bail!(UsageError("--rate must be at least 1".into()));
                }
                config.source.rate_limit = r;
            }
            ingest(config, from, to, dir, workers, out)
        }
        Command::BuildDataset { per_tier, seed, out: path } => {
            let app = App::new(config)?;
            let items = dataset::build_all(app.api.corpus(), per_tier, seed)?;
            dataset::save(&items, &path)?;
            writeln!(out, "wrote {} items to {}", items.len(), path.display())?;
            Ok(())
        }
        Command::Ask { question, no_feedback, variant } => {
            let app = App::new(config)?;
            let variant = match variant {
                Some(v) => v.parse::<LectureVariant>().map_err(|e| UsageError(e.to_string()))?,
                None => app.variant(),
            };
            ask(&app, variant, question, no_feedback, input, out)
        }
        Command::Bench { methods, dataset, out: path, tier } => {
            let app = App::new(config)?;
            let tier = tier.map(|t| t.parse::<Tier>().map_err(|e| UsageError(e.to_string()))).transpose()?;
            let results = bench(&app, &methods, dataset.as_deref(), tier)?;
            writeln!(out, "{}", render_table(&results).trim_end())?;
            if let Some(p) = path {
                std::fs::write(&p, serde_json::to_string_pretty(&results)? + "\n")
                    .with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(())
        }
        Command::Baseline { command } => {
            let app = App::new(config)?;
            match command {
                BaselineCommand::BuildIndex { out: path } => {
                    let path = path.unwrap_or_else(|| app.config.embedding.index.clone());
                    let index = app.build_index()?;
                    index.save(&path)?;
                    writeln!(
                        out,
                        "indexed {} blocks (dimension {}) into {}",
                        index.len(),
                        index.dimension,
                        path.display()
                    )?;
                    Ok(())
                }
                BaselineCommand::Ask { question, k } => {
                    if k == 0 {
                        bail!(UsageError("--k must be at least 1".into()));
                    }
                    let items = app.dataset()?;
                    let baseline = app.baseline(&items)?;
                    for b in baseline.retrieve(&question, k)? {
                        writeln!(out, "context: {} ({})", b.fund_name, b.block_id())?;
                    }
                    let reply = baseline.answer(&question, k)?;
                    writeln!(out, "answer: {reply}")?;
                    Ok(())
                }
            }
        }
        Command::Serve { bind } => {
            let app = App::new(config)?;
            let items = app.dataset()?;
            let state = AppState::new(app.orchestrator(&items)?, app.variant());
            let bind = bind.unwrap_or_else(|| app.config.bind.clone());
            tokio::runtime::Runtime::new()?.block_on(server::serve(state, &bind))
        }
    }
}

fn ingest(
    config: Config,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
    dir: Option<PathBuf>,
    workers: usize,
    out: &mut dyn Write,
) -> Result<()> {
    let Some(dir) = dir.or_else(|| config.corpus_dir.clone()) else {
        bail!(UsageError("no output directory: pass --out or set corpus_dir".into()));
    };
    let all = DateWindow::all();
    let window = DateWindow::new(from.unwrap_or(all.from), to.unwrap_or(all.to));
    let s = &config.source;
    let mut source = SourceConfig::new(&s.base_url, &s.contact);
    source.rate_limit = s.rate_limit;
    source.index_path = s.index_path.clone();
    let client = SourceClient::for_source(source);
    let refs = fetch_filings(&client, window)?;
    let store = ReportStore::new(&dir);
    let mut raws = Vec::new();
    let mut failed = 0;
    for r in download_all(&client, &store, &refs, workers) {
        match r {
            Ok(raw) => raws.push(raw),
            Err(e) => {
                log::warn!("{e}");
                failed += 1;
            }
        }
    }
    if raws.is_empty() && failed > 0 {
        bail!("all {failed} downloads failed");
    }
    let corpus = Corpus::from_raw(raws)?;
    corpus.save(&dir)?;
    let idx = corpus.index();
    writeln!(
        out,
        "{} filings listed, {} failed, {} reports and {} funds indexed in {}",
        refs.len(),
        failed,
        idx.report_count,
        idx.fund_count,
        dir.display()
    )?;
    Ok(())
}

pub fn bench(
    app: &App,
    methods: &[String],
    dataset: Option<&std::path::Path>,
    tier: Option<Tier>,
) -> Result<Vec<BenchResult>> {
    let items = app.dataset_from(dataset.or(app.config.dataset.as_deref()))?;
    let mut results = Vec::new();
    for name in methods {
        let method = app.method(name.trim(), &items)?;
        match tier {
            Some(t) => results.push(run_bench(method.as_ref(), &items, Some(t))?),
            None => results.extend(run_tiers(method.as_ref(), &items)),
        }
    }
    Ok(results)
}

fn print_draft(out: &mut dyn Write, d: &WorkflowDraft) -> Result<()> {
    writeln!(out, "--- draft {} ---", d.number)?;
    if !d.code.is_empty() {
        writeln!(out, "{}", d.code.trim_end())?;
    }
    for diag in &d.diagnostics {
        writeln!(out, "problem: {diag}")?;
    }
    if let Some(a) = d.answer_text() {
        writeln!(out, "answer: {a}")?;
    }
    if let Some(e) = &d.error {
        writeln!(out, "error: {e}")?;
    }
    Ok(())
}

fn read_line(input: &mut dyn BufRead) -> Result<Option<String>> {
    let mut line = String::new();
    if input.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    Ok(Some(line.trim().to_string()))
}

fn ask(
    app: &App,
    variant: LectureVariant,
    question: Option<String>,
    no_feedback: bool,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<()> {
    let question = match question {
        Some(q) => q,
        None => {
            write!(out, "question> ")?;
            out.flush()?;
            read_line(input)?.filter(|q| !q.is_empty()).ok_or_else(|| UsageError("no question given".into()))?
        }
    };
    let items = app.dataset()?;
    let o = app.orchestrator(&items)?;
    let mut s = o.start_session(&LectureConfig::new(variant))?;
    if s.state == SessionState::Failed {
        bail!("{}", s.failure.unwrap_or_default());
    }
    let mut draft = o.ask(&mut s, &question)?;
    loop {
        print_draft(out, &draft)?;
        if s.state == SessionState::Failed {
            bail!("{}", s.failure.clone().unwrap_or_default());
        }
        if no_feedback {
            break;
        }
        writeln!(out, "summary: {}", o.summarize(&mut s)?)?;
        write!(out, "feedback (empty line approves, `quit` stops)> ")?;
        out.flush()?;
        match read_line(input)?.as_deref() {
            None | Some("") => break,
            Some("quit") => {
                writeln!(out, "stopped without approving; session {}", s.id)?;
                return Ok(());
            }
            Some(text) => draft = o.feedback(&mut s, text)?,
        }
    }
    let fin = o.approve(&mut s)?;
    writeln!(out, "approved: {}", fin.answer_text)?;
    writeln!(out, "session: {}", fin.session_id)?;
    Ok(())
}
