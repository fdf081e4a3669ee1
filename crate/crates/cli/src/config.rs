//! TOML config file for `run`, resolved with flag-over-file precedence.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context};
use serde::Deserialize;

use ideation_core::corpus::BaselineSample;
use ideation_core::experiment::{ExperimentSpec, ReportFormat};
use ideation_core::gateway::{BackendConfig, BackendKind};
use ideation_core::protocol::{ReviewerPool, RunConfig};

use crate::{parse_baseline_sample, parse_formats, BackendChoice, RunArgs};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub corpus: CorpusSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub publications: Option<PathBuf>,
    pub researchers: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub pivot_year: Option<i32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub team_size: Option<usize>,
    pub rounds: Option<u32>,
    pub top_k: Option<usize>,
    pub trials: Option<u32>,
    pub seed: Option<u64>,
    pub diversity_fraction: Option<f64>,
    pub profile_titles: Option<usize>,
    pub enable_discussion: Option<bool>,
    pub enable_vote: Option<bool>,
    pub reviewer_pool: Option<String>,
    pub baseline_sample: Option<String>,
    pub parallel: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub kind: Option<String>,
    pub endpoint: Option<String>,
    pub embed_endpoint: Option<String>,
    pub model_name: Option<String>,
    pub embed_model_name: Option<String>,
    pub timeout_secs: Option<u64>,
    pub max_retries: Option<u32>,
    pub embed_dim: Option<usize>,
    pub seed: Option<u64>,
    pub script: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub formats: Option<Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn parse_backend_kind(name: &str) -> anyhow::Result<BackendKind> {
    match name.to_ascii_lowercase().as_str() {
        "scripted" => Ok(BackendKind::Scripted),
        "http" | "http_chat" => Ok(BackendKind::HttpChat),
        other => bail!("unknown backend kind `{other}` (scripted|http_chat)"),
    }
}

fn parse_reviewer_pool(name: &str) -> anyhow::Result<ReviewerPool> {
    match name.to_ascii_lowercase().as_str() {
        "internal" => Ok(ReviewerPool::Internal),
        "external" => Ok(ReviewerPool::External),
        other => bail!("unknown reviewer pool `{other}` (internal|external)"),
    }
}

/// Flags override the file; the file overrides built-in defaults.
pub fn resolve(args: &RunArgs, file: &FileConfig) -> anyhow::Result<ExperimentSpec> {
    let publications = args
        .publications
        .clone()
        .or_else(|| file.corpus.publications.clone())
        .context("missing --publications (or [corpus].publications in the config)")?;
    let researchers = args
        .researchers
        .clone()
        .or_else(|| file.corpus.researchers.clone())
        .context("missing --researchers (or [corpus].researchers in the config)")?;
    let embeddings = args
        .embeddings
        .clone()
        .or_else(|| file.corpus.embeddings.clone())
        .context("missing --embeddings (or [corpus].embeddings in the config)")?;
    let output_dir = args
        .out
        .clone()
        .or_else(|| file.output.dir.clone())
        .context("missing --out (or [output].dir in the config)")?;

    let defaults = RunConfig::default();
    let reviewer_pool = match args.reviewer_pool {
        Some(choice) => choice.into(),
        None => match &file.run.reviewer_pool {
            Some(name) => parse_reviewer_pool(name)?,
            None => defaults.reviewer_pool,
        },
    };
    let run = RunConfig {
        team_size: args
            .team_size
            .or(file.run.team_size)
            .unwrap_or(defaults.team_size),
        rounds: args.rounds.or(file.run.rounds).unwrap_or(defaults.rounds),
        top_k: args.top_k.or(file.run.top_k).unwrap_or(defaults.top_k),
        trials: args.trials.or(file.run.trials).unwrap_or(defaults.trials),
        enable_discussion: if args.no_discussion {
            false
        } else {
            file.run
                .enable_discussion
                .unwrap_or(defaults.enable_discussion)
        },
        enable_vote: if args.no_vote {
            false
        } else {
            file.run.enable_vote.unwrap_or(defaults.enable_vote)
        },
        reviewer_pool,
        seed: args.seed.or(file.run.seed).unwrap_or(defaults.seed),
        diversity_fraction: args
            .diversity_fraction
            .or(file.run.diversity_fraction)
            .unwrap_or(defaults.diversity_fraction),
        profile_titles: args
            .profile_titles
            .or(file.run.profile_titles)
            .unwrap_or(defaults.profile_titles),
    };

    let backend_defaults = BackendConfig::default();
    let kind = match args.backend {
        Some(BackendChoice::Scripted) => BackendKind::Scripted,
        Some(BackendChoice::Http) => BackendKind::HttpChat,
        None => match &file.backend.kind {
            Some(name) => parse_backend_kind(name)?,
            None => backend_defaults.kind,
        },
    };
    let backend = BackendConfig {
        kind,
        endpoint: args.endpoint.clone().or_else(|| file.backend.endpoint.clone()),
        embed_endpoint: args
            .embed_endpoint
            .clone()
            .or_else(|| file.backend.embed_endpoint.clone()),
        model_name: args
            .model
            .clone()
            .or_else(|| file.backend.model_name.clone())
            .unwrap_or(backend_defaults.model_name),
        embed_model_name: args
            .embed_model
            .clone()
            .or_else(|| file.backend.embed_model_name.clone())
            .unwrap_or(backend_defaults.embed_model_name),
        timeout: Duration::from_secs(
            args.timeout_secs
                .or(file.backend.timeout_secs)
                .unwrap_or(backend_defaults.timeout.as_secs()),
        ),
        max_retries: args
            .max_retries
            .or(file.backend.max_retries)
            .unwrap_or(backend_defaults.max_retries),
        embed_dim: args.embed_dim.or(file.backend.embed_dim),
        seed: args
            .backend_seed
            .or(file.backend.seed)
            .unwrap_or(backend_defaults.seed),
        script_path: args.script.clone().or_else(|| file.backend.script.clone()),
        ..backend_defaults
    };

    let baseline_sample = match args
        .baseline_sample
        .clone()
        .or_else(|| file.run.baseline_sample.clone())
    {
        Some(text) => parse_baseline_sample(&text)?,
        None => BaselineSample::All,
    };
    let formats: Vec<ReportFormat> = match args
        .format
        .clone()
        .or_else(|| file.output.formats.clone())
    {
        Some(names) => parse_formats(&names)?,
        None => vec![ReportFormat::Structured, ReportFormat::Markdown],
    };

    Ok(ExperimentSpec {
        publications,
        researchers,
        embeddings,
        pivot_year: args
            .pivot_year
            .or(file.corpus.pivot_year)
            .unwrap_or(2011),
        run,
        backend,
        output_dir,
        formats,
        baseline_sample,
        resume: args.resume,
        parallel: args.parallel.or(file.run.parallel),
    })
}
