//! Command-line experiment runner.
//!
//! Subcommands: `ingest` (validate a corpus and write the embedding sidecar),
//! `run` (seeded trial batches with ablation flags), `score` (metrics for an
//! externally supplied abstract), and `report` (re-render saved reports).
//! `run` reads an optional TOML config file; every flag overrides it.

mod config;

use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ideation_core::corpus::{split_by_year, BaselineSample, Corpus};
use ideation_core::embed::EmbeddingIndex;
use ideation_core::experiment::{self, ReportFormat};
use ideation_core::gateway::{BackendConfig, BackendKind, Gateway, DEFAULT_EMBED_DIM};
use ideation_core::metrics;
use ideation_core::protocol::ReviewerPool;

use config::FileConfig;

#[derive(Parser)]
#[command(name = "ideation", version, about = "Multi-agent scientific ideation engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and write its embedding sidecar.
    Ingest(IngestArgs),
    /// Run a batch of seeded trials and emit reports.
    Run(Box<RunArgs>),
    /// Score an externally supplied abstract against a corpus.
    Score(ScoreArgs),
    /// Re-render report files from a saved structured report.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendChoice {
    Scripted,
    Http,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReviewerPoolChoice {
    Internal,
    External,
}

impl From<ReviewerPoolChoice> for ReviewerPool {
    fn from(choice: ReviewerPoolChoice) -> Self {
        match choice {
            ReviewerPoolChoice::Internal => ReviewerPool::Internal,
            ReviewerPoolChoice::External => ReviewerPool::External,
        }
    }
}

/// Backend flags shared by the subcommands that talk to a model.
#[derive(Args, Clone)]
struct BackendArgs {
    /// Backend kind: deterministic scripted stand-in or an HTTP endpoint.
    #[arg(long, value_enum, default_value = "scripted")]
    backend: BackendChoice,
    /// Chat endpoint URL (http only; IDEATION_LLM_ENDPOINT also works).
    #[arg(long)]
    endpoint: Option<String>,
    /// Embedding endpoint URL (http only; IDEATION_EMBED_ENDPOINT also works).
    #[arg(long)]
    embed_endpoint: Option<String>,
    /// Chat model identifier sent to the endpoint.
    #[arg(long, default_value = "llama3.1")]
    model: String,
    /// Embedding model identifier sent to the endpoint.
    #[arg(long, default_value = "mxbai-embed-large")]
    embed_model: String,
    /// Script file (tag -> template records) for the scripted backend.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    /// Retries after a failed attempt (total attempts = retries + 1).
    #[arg(long, default_value_t = 2)]
    max_retries: u32,
    /// Expected embedding dimension.
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Seed for scripted responses.
    #[arg(long, default_value_t = 0)]
    backend_seed: u64,
}

impl BackendArgs {
    fn to_config(&self) -> BackendConfig {
        BackendConfig {
            kind: match self.backend {
                BackendChoice::Scripted => BackendKind::Scripted,
                BackendChoice::Http => BackendKind::HttpChat,
            },
            endpoint: self.endpoint.clone(),
            embed_endpoint: self.embed_endpoint.clone(),
            model_name: self.model.clone(),
            embed_model_name: self.embed_model.clone(),
            timeout: Duration::from_secs(self.timeout_secs),
            max_retries: self.max_retries,
            embed_dim: self.embed_dim,
            seed: self.backend_seed,
            script_path: self.script.clone(),
            ..BackendConfig::default()
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    publications: PathBuf,
    #[arg(long)]
    researchers: PathBuf,
    /// Output path for the embedding sidecar.
    #[arg(long)]
    embeddings: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; every flag below overrides it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    publications: Option<PathBuf>,
    #[arg(long)]
    researchers: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    pivot_year: Option<i32>,
    #[arg(long)]
    team_size: Option<usize>,
    #[arg(long)]
    rounds: Option<u32>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    diversity_fraction: Option<f64>,
    #[arg(long)]
    profile_titles: Option<usize>,
    /// Skip the cross-revision/synthesis discussion cycle.
    #[arg(long)]
    no_discussion: bool,
    /// Replace the ballot vote with a single leader judgment.
    #[arg(long)]
    no_vote: bool,
    #[arg(long, value_enum)]
    reviewer_pool: Option<ReviewerPoolChoice>,
    /// Baseline sample size: `all` or a number of corpus abstracts.
    #[arg(long)]
    baseline_sample: Option<String>,
    /// Bound on concurrently running trials.
    #[arg(long)]
    parallel: Option<usize>,
    /// Resume trials that left a checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
    /// Report formats, comma-separated: structured,markdown
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    embed_endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    embed_model: Option<String>,
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    max_retries: Option<u32>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    backend_seed: Option<u64>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Text file holding the abstract to score.
    #[arg(long = "abstract", value_name = "FILE")]
    abstract_path: PathBuf,
    #[arg(long)]
    publications: PathBuf,
    #[arg(long)]
    researchers: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 2011)]
    pivot_year: i32,
    /// Baseline sample size: `all` or a number of corpus abstracts.
    #[arg(long, default_value = "all")]
    baseline_sample: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// A report.ldjson file or a directory containing one.
    #[arg(long)]
    input: PathBuf,
    /// Output directory; defaults to the input's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report formats, comma-separated: structured,markdown
    #[arg(long, value_delimiter = ',', default_value = "markdown")]
    format: Vec<String>,
}

fn parse_baseline_sample(text: &str) -> anyhow::Result<BaselineSample> {
    if text.eq_ignore_ascii_case("all") {
        Ok(BaselineSample::All)
    } else {
        let size: usize = text
            .parse()
            .with_context(|| format!("baseline sample must be `all` or a number, got `{text}`"))?;
        Ok(BaselineSample::Size(size))
    }
}

fn parse_formats(names: &[String]) -> anyhow::Result<Vec<ReportFormat>> {
    let mut formats = Vec::new();
    for name in names {
        match name.trim().to_ascii_lowercase().as_str() {
            "structured" => formats.push(ReportFormat::Structured),
            "markdown" => formats.push(ReportFormat::Markdown),
            other => bail!("unknown report format `{other}` (structured|markdown)"),
        }
    }
    if formats.is_empty() {
        bail!("at least one report format is required");
    }
    Ok(formats)
}

fn cmd_ingest(args: &IngestArgs) -> anyhow::Result<()> {
    let corpus = Corpus::load(&args.publications, &args.researchers)?;
    let mut backend = args.backend.to_config();
    if backend.kind == BackendKind::Scripted && backend.embed_dim.is_none() {
        backend.embed_dim = Some(DEFAULT_EMBED_DIM);
    }
    let gateway = Gateway::new(&backend)?;
    let mut index: Option<EmbeddingIndex> = None;
    for (id, publication) in corpus.publications() {
        let vector = gateway
            .embed(&publication.abstract_text)
            .with_context(|| format!("embedding publication `{id}`"))?;
        index
            .get_or_insert_with(|| EmbeddingIndex::new(vector.dim()))
            .insert(id.clone(), vector)?;
    }
    let Some(index) = index else {
        bail!("corpus has no publications to embed");
    };
    if let Some(parent) = args.embeddings.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    index.save(&args.embeddings)?;
    println!(
        "ingested {} publications / {} researchers; wrote {} embeddings (dim {}) to {}",
        corpus.publications().len(),
        corpus.researchers().len(),
        index.len(),
        index.dim(),
        args.embeddings.display()
    );
    Ok(())
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<()> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let spec = config::resolve(args, &file)?;
    let report = experiment::run_experiment(&spec)?;
    println!(
        "completed {}/{} trials (aborted {}); reports in {}",
        report.completed,
        report.run.trials,
        report.aborted,
        spec.output_dir.display()
    );
    println!(
        "means: HD {} CD {} CI {} ON {}",
        fmt_opt(report.mean_hd),
        fmt_opt(report.mean_cd),
        fmt_opt(report.mean_ci),
        fmt_opt(report.mean_on)
    );
    if report.aborted > 0 {
        bail!(
            "{} trial(s) aborted; checkpoints written for resume with --resume",
            report.aborted
        );
    }
    Ok(())
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map_or_else(|| "undef".to_string(), |v| format!("{v:.4}"))
}

fn cmd_score(args: &ScoreArgs) -> anyhow::Result<()> {
    let abstract_text = std::fs::read_to_string(&args.abstract_path)
        .with_context(|| format!("reading {}", args.abstract_path.display()))?;
    if abstract_text.trim().is_empty() {
        bail!("abstract file is empty");
    }
    let corpus = Corpus::load(&args.publications, &args.researchers)?;
    let index = EmbeddingIndex::load(&args.embeddings)?;
    let split = split_by_year(&corpus, args.pivot_year)?;
    let mut backend = args.backend.to_config();
    match backend.embed_dim {
        None => backend.embed_dim = Some(index.dim()),
        Some(dim) if dim != index.dim() => bail!(
            "configured embedding dimension {dim} does not match index dimension {}",
            index.dim()
        ),
        Some(_) => {}
    }
    let gateway = Gateway::new(&backend)?;
    let sample = parse_baseline_sample(&args.baseline_sample)?;
    let stats = ideation_core::corpus::compute_stats(&corpus, &split, &index, sample, args.seed)?;
    let embedding = gateway.embed(abstract_text.trim())?;
    let report = metrics::evaluate(&embedding, &corpus, &split, &index, &stats)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!(
        "HD {:.4}  CD {:.4}  CI {:.4}  ON {}",
        report.hd,
        report.cd,
        report.ci,
        fmt_opt(report.on)
    );
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<()> {
    let input = if args.input.is_dir() {
        args.input.join("report.ldjson")
    } else {
        args.input.clone()
    };
    let report = experiment::load_report(&input)?;
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => input
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let formats = parse_formats(&args.format)?;
    let written = experiment::emit_report(&report, &formats, &out)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Run(args) => cmd_run(args),
        Command::Score(args) => cmd_score(args),
        Command::Report(args) => cmd_report(args),
    }
}
