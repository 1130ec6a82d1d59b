use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use confmeta::config::Config;
use confmeta::eval::{self, AlignOptions};
use confmeta::extract::SourceChunk;
use confmeta::pipeline::Pipeline;
use confmeta::records::{ExtractionRecord, Task};
use confmeta::report::{self, Metric};
use confmeta::store::{Stage, Store};
use confmeta::{api, web};

#[derive(Parser)]
#[command(name = "confmeta", version, about = "Conference metadata to Wikidata QuickStatements")]
struct Cli {
    /// Configuration file (TOML).
    #[arg(long, short, env = "CONFMETA_CONFIG", default_value = "confmeta.toml", global = true)]
    config: PathBuf,
    /// Forbid network access; only fixtures and replay files are used.
    #[arg(long, global = true)]
    offline: bool,
    /// Store directory, overriding the configured one.
    #[arg(long, env = "CONFMETA_STORE", global = true)]
    store: Option<PathBuf>,
    /// Fixed clock for reproducible runs (RFC 3339).
    #[arg(long, env = "CONFMETA_NOW", global = true)]
    now: Option<DateTime<Utc>>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Crawl a conference website into page records (JSON Lines).
    HarvestWeb {
        conference: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chunk the proceedings front matter for one task (JSON Lines).
    IngestFrontmatter {
        conference: String,
        #[arg(long)]
        task: Task,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an extraction task over chunks or crawled pages.
    Extract {
        #[arg(long)]
        task: Task,
        /// Chunks from ingest-frontmatter.
        #[arg(long, conflicts_with = "pages", required_unless_present = "pages")]
        chunks: Option<PathBuf>,
        /// Pages from harvest-web; needs --conference.
        #[arg(long, requires = "conference")]
        pages: Option<PathBuf>,
        #[arg(long)]
        conference: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query papers and authorships of a conference's proceedings.
    HarvestSparql {
        conference: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconcile entity mentions in extraction records.
    Reconcile {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the reconciliation decisions.
        #[arg(long)]
        decisions: Option<PathBuf>,
    },
    /// Compile curated records into a QuickStatements batch.
    Compile {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold annotations.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Report path; written as both .txt and .json.
        #[arg(long)]
        report: PathBuf,
        /// Score counts rows as one item instead of one per number.
        #[arg(long)]
        counts_as_pair: bool,
    },
    /// Chart-ready CSV of a metric over a conference series.
    Report {
        #[arg(long)]
        series: String,
        #[arg(long, default_value = "acceptance_rate")]
        metric: Metric,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the curation API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Run (or resume) a conference's job through the stored pipeline.
    Run {
        conference: String,
        /// Stop before this stage.
        #[arg(long, default_value = "done")]
        until: Stage,
        /// Pause after each stage (lets a supervisor interrupt the run).
        #[arg(long, default_value_t = 0)]
        pause_ms: u64,
    },
    /// List stored jobs.
    Jobs,
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = Config::load(&cli.config)?;
    config.offline |= cli.offline;
    if let Some(dir) = cli.store {
        config.store_dir = dir;
    }
    let now = cli.now.unwrap_or_else(Utc::now);
    let pipeline = Pipeline::new(config)?;
    let conf = |key: &str| pipeline.config.conference(key).ok_or_else(|| anyhow!("unknown conference {key}"));
    let err = |e: String| anyhow!(e);

    match cli.cmd {
        Cmd::HarvestWeb { conference, out } => {
            let c = conf(&conference)?;
            let result = pipeline.crawl_site(c).map_err(err)?.ok_or_else(|| anyhow!("{conference} has no website"))?;
            for w in &result.warnings {
                log::warn!("{w}");
            }
            let mut buf = Vec::new();
            web::write_jsonl(&result.pages, &mut buf)?;
            std::fs::write(&out, buf)?;
            println!("{} pages", result.pages.len());
        }
        Cmd::IngestFrontmatter { conference, task, out } => {
            let c = conf(&conference)?;
            let text = pipeline.frontmatter_text(c).map_err(err)?.ok_or_else(|| anyhow!("{conference} has no front matter"))?;
            let chunks = pipeline.frontmatter_chunks(c, &text, task).map_err(err)?;
            write_lines(&out, &chunks)?;
            println!("{} chunks", chunks.len());
        }
        Cmd::Extract { task, chunks, pages, conference, out } => {
            let chunks: Vec<SourceChunk> = match (chunks, pages) {
                (Some(path), _) => read_lines(&path)?,
                (None, Some(path)) => {
                    let file = std::fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                    let pages = web::read_jsonl(BufReader::new(file))?;
                    web::source_chunks(conference.as_deref().expect("required by clap"), &pages, task)
                }
                (None, None) => unreachable!("required by clap"),
            };
            let mut chunks = chunks;
            chunks.truncate(pipeline.config.llm.max_chunks.max(1));
            let outcome = pipeline.extract_chunks(task, &chunks).map_err(err)?;
            for e in &outcome.errors {
                log::warn!("chunk {} from {}: {}", e.chunk_index, e.source_url, e.error);
            }
            write_lines(&out, &outcome.records)?;
            println!("{} records, {} chunk errors", outcome.records.len(), outcome.errors.len());
        }
        Cmd::HarvestSparql { conference, out } => {
            let harvest = pipeline.harvest_sparql(conf(&conference)?).map_err(err)?;
            write_lines(&out, &harvest.records)?;
            println!("{} records, {} sub-events", harvest.records.len(), harvest.subevents.len());
        }
        Cmd::Reconcile { records, out, decisions } => {
            let mut recs: Vec<ExtractionRecord> = read_lines(&records)?;
            let (outcome, vocab_review) = pipeline.reconcile_records(&mut recs, now).map_err(err)?;
            write_lines(&out, &recs)?;
            if let Some(path) = decisions {
                write_lines(&path, &outcome.decisions)?;
            }
            println!(
                "{} decisions, {} sent to review, {} unknown labels",
                outcome.decisions.len(),
                outcome.review.len(),
                vocab_review
            );
        }
        Cmd::Compile { records, out } => {
            let recs: Vec<ExtractionRecord> = read_lines(&records)?;
            let (text, stats) = pipeline.compile_records(&recs).map_err(err)?;
            std::fs::write(&out, text)?;
            println!("{}", serde_json::to_string(&stats)?);
        }
        Cmd::Eval { pred, gold, report, counts_as_pair } => {
            let preds: Vec<ExtractionRecord> = read_lines(&pred)?;
            let gold = eval::load_gold_dir(&gold)?;
            let scores = eval::evaluate(&preds, &gold, AlignOptions { counts_as_pair })?;
            let table = scores.to_table();
            if let Some(dir) = report.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(report.with_extension("txt"), &table)?;
            std::fs::write(report.with_extension("json"), serde_json::to_string_pretty(&scores)?)?;
            print!("{table}");
        }
        Cmd::Report { series, metric, out } => {
            let store = Store::open(&pipeline.config.store_dir)?;
            let csv = report::to_csv(&report::report(store.state(), &series, metric), metric);
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Cmd::Serve { bind } => {
            let addr = bind.unwrap_or_else(|| pipeline.config.api.bind.clone());
            let state = api::app_state(pipeline)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = api::bind(&addr).await?;
                api::serve(listener, state).await
            })?;
        }
        Cmd::Run { conference, until, pause_ms } => {
            conf(&conference)?;
            let store = Mutex::new(Store::open(&pipeline.config.store_dir)?);
            let job = match pipeline.job_for(&store, &conference) {
                Some(j) if j.stage != Stage::Done => j,
                _ => pipeline.create_job(&store, &conference, now)?,
            };
            let mut stage = job.stage;
            while stage < until && stage != Stage::Done {
                let job = pipeline.run_stage(&store, &job.id, stage, now)?;
                let hash = store.lock().expect("single-threaded").state_hash();
                println!("stage {stage} done job={} state_hash={hash}", job.id);
                std::io::stdout().flush()?;
                if pause_ms > 0 {
                    std::thread::sleep(Duration::from_millis(pause_ms));
                }
                stage = job.stage;
            }
            let st = store.lock().expect("single-threaded");
            println!("job {} at {} state_hash={}", job.id, stage, st.state_hash());
        }
        Cmd::Jobs => {
            let store = Store::open(&pipeline.config.store_dir)?;
            for job in store.state().jobs.values() {
                println!("{}", serde_json::to_string(job)?);
            }
        }
    }
    Ok(())
}
