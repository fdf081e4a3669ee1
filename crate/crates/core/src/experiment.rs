//! Config-driven experiment runner: load corpus and index, compute baseline
//! stats, run seeded trial batches (optionally in parallel), and emit
//! per-trial and aggregate reports.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::{self, BaselineSample, Corpus, CorpusStats};
use crate::embed::EmbeddingIndex;
use crate::error::{Error, Result};
use crate::gateway::{BackendConfig, Gateway};
use crate::jsonl;
use crate::metrics::MetricReport;
use crate::protocol::{
    Checkpoint, Engine, PromptBundle, RunConfig, TranscriptMeta, TrialOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Structured,
    Markdown,
}

/// Everything one experiment needs: corpus paths, run knobs, backend, output.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub publications: PathBuf,
    pub researchers: PathBuf,
    pub embeddings: PathBuf,
    pub pivot_year: i32,
    pub run: RunConfig,
    pub backend: BackendConfig,
    pub output_dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    pub baseline_sample: BaselineSample,
    /// Resume trials whose checkpoint file exists instead of restarting them.
    pub resume: bool,
    /// Upper bound on concurrently running trials (parallel builds only).
    pub parallel: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub seed: u64,
    pub status: TrialStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_failed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
}

/// Per-experiment summary plus every trial record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config_digest: String,
    pub backend: String,
    pub base_seed: u64,
    pub run: RunConfig,
    pub pivot_year: i32,
    pub corpus_publications: usize,
    pub corpus_researchers: usize,
    pub stats: CorpusStats,
    pub completed: usize,
    pub aborted: usize,
    pub undefined_on: usize,
    pub mean_hd: Option<f64>,
    pub mean_cd: Option<f64>,
    pub mean_ci: Option<f64>,
    pub mean_on: Option<f64>,
    #[serde(skip_serializing, default)]
    pub trials: Vec<TrialRecord>,
}

fn trial_seed(base: u64, trial: u32) -> u64 {
    base.wrapping_add(u64::from(trial))
}

pub fn transcript_path(output_dir: &Path, trial: u32) -> PathBuf {
    output_dir.join(format!("trial_{trial:03}.transcript.ldjson"))
}

pub fn checkpoint_path(output_dir: &Path, trial: u32) -> PathBuf {
    output_dir.join(format!("trial_{trial:03}.checkpoint.json"))
}

fn mean_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Runs `spec.run.trials` independent seeded trials (seed of trial t is
/// `base_seed + t`), persisting one transcript per completed trial, one
/// checkpoint per aborted trial, and the aggregate report files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateReport> {
    spec.run.validate()?;
    std::fs::create_dir_all(&spec.output_dir).map_err(|e| Error::io(&spec.output_dir, e))?;

    let corpus = Corpus::load(&spec.publications, &spec.researchers)?;
    let index = EmbeddingIndex::load(&spec.embeddings)?;
    let split = corpus::split_by_year(&corpus, spec.pivot_year)?;

    let mut backend = spec.backend.clone();
    match backend.embed_dim {
        None => backend.embed_dim = Some(index.dim()),
        Some(dim) if dim != index.dim() => {
            return Err(Error::Config(format!(
                "configured embedding dimension {dim} does not match index dimension {}",
                index.dim()
            )))
        }
        Some(_) => {}
    }
    let gateway = Gateway::new(&backend)?;

    let stats = corpus::compute_stats(&corpus, &split, &index, spec.baseline_sample, spec.run.seed)?;
    let engine = Engine::new(&corpus, &split, &index, &stats, &gateway, PromptBundle::default())?;
    let digest = spec.run.digest();

    let run_one = |trial: u32| -> Result<(u32, TrialOutcome)> {
        let mut config = spec.run.clone();
        config.seed = trial_seed(spec.run.seed, trial);
        let checkpoint_file = checkpoint_path(&spec.output_dir, trial);
        let outcome = if spec.resume && checkpoint_file.exists() {
            let checkpoint = Checkpoint::load(&checkpoint_file)?;
            engine.resume_trial(&config, checkpoint)?
        } else {
            engine.run_trial(&config)?
        };
        Ok((trial, outcome))
    };

    let trials = spec.run.trials;
    let outcomes = run_trials_bounded(trials, spec.parallel, &run_one)?;

    let mut records = Vec::with_capacity(outcomes.len());
    let mut hd = Vec::new();
    let mut cd = Vec::new();
    let mut ci = Vec::new();
    let mut on = Vec::new();
    let mut undefined_on = 0usize;
    for (trial, outcome) in outcomes {
        let seed = trial_seed(spec.run.seed, trial);
        match outcome {
            TrialOutcome::Completed(run) => {
                let meta = TranscriptMeta {
                    seed,
                    config_digest: digest.clone(),
                    backend: gateway.identity(),
                };
                run.transcript
                    .save(&transcript_path(&spec.output_dir, trial), &meta)?;
                let stale = checkpoint_path(&spec.output_dir, trial);
                if stale.exists() {
                    std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
                }
                hd.push(run.metrics.hd);
                cd.push(run.metrics.cd);
                ci.push(run.metrics.ci);
                match run.metrics.on {
                    Some(value) => on.push(value),
                    None => undefined_on += 1,
                }
                records.push(TrialRecord {
                    trial,
                    seed,
                    status: TrialStatus::Completed,
                    stage_failed: None,
                    error: None,
                    metrics: Some(run.metrics),
                });
            }
            TrialOutcome::Aborted {
                stage,
                error,
                checkpoint,
            } => {
                checkpoint.save(&checkpoint_path(&spec.output_dir, trial))?;
                let stale = transcript_path(&spec.output_dir, trial);
                if stale.exists() {
                    std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
                }
                records.push(TrialRecord {
                    trial,
                    seed,
                    status: TrialStatus::Aborted,
                    stage_failed: Some(stage.to_string()),
                    error: Some(error),
                    metrics: None,
                });
            }
        }
    }

    let completed = records
        .iter()
        .filter(|r| r.status == TrialStatus::Completed)
        .count();
    let report = AggregateReport {
        config_digest: digest,
        backend: gateway.identity(),
        base_seed: spec.run.seed,
        run: spec.run.clone(),
        pivot_year: spec.pivot_year,
        corpus_publications: corpus.publications().len(),
        corpus_researchers: corpus.researchers().len(),
        stats,
        completed,
        aborted: records.len() - completed,
        undefined_on,
        mean_hd: mean_of(&hd),
        mean_cd: mean_of(&cd),
        mean_ci: mean_of(&ci),
        mean_on: mean_of(&on),
        trials: records,
    };
    emit_report(&report, &spec.formats, &spec.output_dir)?;
    Ok(report)
}

#[cfg(feature = "parallel")]
fn run_trials_bounded(
    trials: u32,
    parallel: Option<usize>,
    run_one: &(dyn Fn(u32) -> Result<(u32, TrialOutcome)> + Sync),
) -> Result<Vec<(u32, TrialOutcome)>> {
    let body = || crate::par::try_map_indexed(trials as usize, |t| run_one(t as u32));
    match parallel {
        Some(bound) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(bound.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(body)
        }
        None => body(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_trials_bounded(
    trials: u32,
    _parallel: Option<usize>,
    run_one: &(dyn Fn(u32) -> Result<(u32, TrialOutcome)> + Sync),
) -> Result<Vec<(u32, TrialOutcome)>> {
    (0..trials).map(run_one).collect()
}

/// Writes the requested report files into `output_dir` and returns their
/// paths. Structured output is `report.ldjson` (one line per trial, aggregate
/// line last); markdown is `report.md` with the HD↑ CD↓ CI↑ ON↑ table.
pub fn emit_report(
    report: &AggregateReport,
    formats: &[ReportFormat],
    output_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if report.trials.is_empty() {
        return Err(Error::Config("report contains no trials".into()));
    }
    std::fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            ReportFormat::Structured => {
                let path = output_dir.join("report.ldjson");
                let mut lines = Vec::with_capacity(report.trials.len() + 1);
                for trial in &report.trials {
                    lines.push(tagged_line("trial", trial)?);
                }
                lines.push(tagged_line("aggregate", report)?);
                let mut content = lines.join("\n");
                content.push('\n');
                std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
            ReportFormat::Markdown => {
                let path = output_dir.join("report.md");
                std::fs::write(&path, render_markdown(report)).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

fn tagged_line<T: Serialize>(record: &str, value: &T) -> Result<String> {
    let mut value = serde_json::to_value(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    if let Value::Object(ref mut map) = value {
        map.insert("record".into(), Value::String(record.into()));
    }
    jsonl::canonical_line(&value)
}

/// Reads a `report.ldjson` back into an [`AggregateReport`].
pub fn load_report(path: &Path) -> Result<AggregateReport> {
    let records: Vec<(usize, Value)> = jsonl::read_file(path)?;
    let mut trials = Vec::new();
    let mut aggregate: Option<AggregateReport> = None;
    for (line, value) in records {
        let fail = |message: String| Error::MalformedRecord {
            path: path.to_path_buf(),
            line,
            message,
        };
        match value.get("record").and_then(|r| r.as_str()) {
            Some("trial") => trials.push(
                serde_json::from_value::<TrialRecord>(value.clone())
                    .map_err(|e| fail(e.to_string()))?,
            ),
            Some("aggregate") => {
                aggregate = Some(
                    serde_json::from_value::<AggregateReport>(value.clone())
                        .map_err(|e| fail(e.to_string()))?,
                )
            }
            other => return Err(fail(format!("unknown record discriminator {other:?}"))),
        }
    }
    let mut aggregate =
        aggregate.ok_or_else(|| Error::Config("report has no aggregate line".into()))?;
    aggregate.trials = trials;
    Ok(aggregate)
}

fn fmt_opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.4}"),
        None => "undef".to_string(),
    }
}

fn render_markdown(report: &AggregateReport) -> String {
    let mut out = String::new();
    out.push_str("# Experiment report\n\n");
    out.push_str(&format!("- backend: {}\n", report.backend));
    out.push_str(&format!(
        "- base seed: {}; config digest: {}\n",
        report.base_seed, report.config_digest
    ));
    out.push_str(&format!(
        "- team size {}, rounds {}, top-k {}, trials {}\n",
        report.run.team_size, report.run.rounds, report.run.top_k, report.run.trials
    ));
    out.push_str(&format!(
        "- discussion: {}; vote: {}; reviewers: {:?}; diversity fraction: {}\n",
        report.run.enable_discussion,
        report.run.enable_vote,
        report.run.reviewer_pool,
        report.run.diversity_fraction,
    ));
    out.push_str(&format!(
        "- corpus: {} publications / {} researchers; pivot year {}\n",
        report.corpus_publications, report.corpus_researchers, report.pivot_year
    ));
    out.push_str(&format!(
        "- baselines: hd {:.6}, cd {:.6}, ci {:.6}, contemporary citation mean {:.6} (sample {})\n",
        report.stats.baseline_mean_hd,
        report.stats.baseline_mean_cd,
        report.stats.baseline_mean_ci,
        report.stats.mean_citations_contemporary,
        report.stats.sample_size_used,
    ));
    out.push_str(&format!(
        "- trials completed: {}; aborted: {}; undefined ON: {}\n\n",
        report.completed, report.aborted, report.undefined_on
    ));
    out.push_str("| trial | HD↑ | CD↓ | CI↑ | ON↑ |\n");
    out.push_str("|------:|----:|----:|----:|----:|\n");
    for trial in &report.trials {
        match (&trial.status, &trial.metrics) {
            (TrialStatus::Completed, Some(metrics)) => {
                out.push_str(&format!(
                    "| {} | {:.4} | {:.4} | {:.4} | {} |\n",
                    trial.trial,
                    metrics.hd,
                    metrics.cd,
                    metrics.ci,
                    fmt_opt(metrics.on),
                ));
            }
            _ => {
                out.push_str(&format!(
                    "| {} | aborted | aborted | aborted | aborted |\n",
                    trial.trial
                ));
            }
        }
    }
    out.push_str(&format!(
        "| mean | {} | {} | {} | {} |\n",
        fmt_opt(report.mean_hd),
        fmt_opt(report.mean_cd),
        fmt_opt(report.mean_ci),
        fmt_opt(report.mean_on),
    ));
    out
}
