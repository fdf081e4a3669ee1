//! Novelty metrics for a generated abstract against the split corpus.
//!
//! Raw values are 5-nearest-neighbor quantities (mean squared distance to the
//! historical and contemporary sides, mean citation count of the contemporary
//! neighbors); normalized values divide by corpus baselines. The composite
//! score is `on = hd * ci / cd`, undefined when `cd` is zero; that case is
//! reported explicitly, never clamped.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusSplit, CorpusStats};
use crate::embed::{self, EmbeddingIndex, EmbeddingVector};
use crate::error::{Error, Result};

/// Neighbors considered per side; fewer are averaged when the side is smaller.
pub const NEIGHBOR_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hd_raw: f64,
    pub cd_raw: f64,
    pub ci_raw: f64,
    pub hd: f64,
    pub cd: f64,
    pub ci: f64,
    /// `None` exactly when `cd_raw == 0` (overall novelty undefined).
    pub on: Option<f64>,
    pub neighbor_ids_historical: Vec<String>,
    pub neighbor_ids_contemporary: Vec<String>,
}

fn side_dissimilarity(
    query: &EmbeddingVector,
    index: &EmbeddingIndex,
    side: &'static str,
    ids: &std::collections::BTreeSet<String>,
    leave_out: Option<&str>,
) -> Result<(f64, Vec<String>)> {
    let neighbors = match embed::top_k_within(index, query, NEIGHBOR_COUNT, ids, leave_out) {
        Ok(neighbors) => neighbors,
        Err(Error::EmptyEligibleSet) => return Err(Error::EmptySplit { side }),
        Err(other) => return Err(other),
    };
    let mean = neighbors.iter().map(|(_, d)| d).sum::<f64>() / neighbors.len() as f64;
    Ok((mean, neighbors.into_iter().map(|(id, _)| id).collect()))
}

/// Mean squared distance to the nearest historical abstracts.
pub fn historical_dissimilarity(
    query: &EmbeddingVector,
    index: &EmbeddingIndex,
    split: &CorpusSplit,
    leave_out: Option<&str>,
) -> Result<(f64, Vec<String>)> {
    side_dissimilarity(query, index, "historical", &split.historical, leave_out)
}

/// Mean squared distance to the nearest contemporary abstracts.
pub fn contemporary_dissimilarity(
    query: &EmbeddingVector,
    index: &EmbeddingIndex,
    split: &CorpusSplit,
    leave_out: Option<&str>,
) -> Result<(f64, Vec<String>)> {
    side_dissimilarity(query, index, "contemporary", &split.contemporary, leave_out)
}

/// Mean citation count of the given contemporary neighbors.
pub fn contemporary_impact(neighbor_ids: &[String], corpus: &Corpus) -> Result<f64> {
    if neighbor_ids.is_empty() {
        return Err(Error::EmptySplit {
            side: "contemporary",
        });
    }
    let mut sum = 0u64;
    for id in neighbor_ids {
        let publication = corpus
            .publication(id)
            .ok_or_else(|| Error::DanglingReference {
                referrer_kind: "metric",
                referrer: "contemporary_impact".into(),
                target_kind: "publication",
                target: id.clone(),
            })?;
        sum += publication.citations;
    }
    Ok(sum as f64 / neighbor_ids.len() as f64)
}

/// Divides a raw metric by its corpus mean.
pub fn normalize(raw: f64, corpus_mean: f64) -> Result<f64> {
    if corpus_mean.is_nan() || corpus_mean <= 0.0 {
        return Err(Error::NonPositiveMean(corpus_mean));
    }
    Ok(raw / corpus_mean)
}

/// `on = hd * ci / cd`; errors when `cd` is zero.
pub fn overall_novelty(hd: f64, cd: f64, ci: f64) -> Result<f64> {
    if cd == 0.0 {
        return Err(Error::UndefinedOverallNovelty);
    }
    Ok(hd * ci / cd)
}

/// Full metric evaluation of one abstract embedding.
pub fn evaluate(
    query: &EmbeddingVector,
    corpus: &Corpus,
    split: &CorpusSplit,
    index: &EmbeddingIndex,
    stats: &CorpusStats,
) -> Result<MetricReport> {
    let (hd_raw, neighbor_ids_historical) = historical_dissimilarity(query, index, split, None)?;
    let (cd_raw, neighbor_ids_contemporary) =
        contemporary_dissimilarity(query, index, split, None)?;
    let ci_raw = contemporary_impact(&neighbor_ids_contemporary, corpus)?;
    let hd = normalize(hd_raw, stats.baseline_mean_hd)?;
    let cd = normalize(cd_raw, stats.baseline_mean_cd)?;
    let ci = normalize(ci_raw, stats.mean_citations_contemporary)?;
    let on = match overall_novelty(hd, cd, ci) {
        Ok(value) => Some(value),
        Err(Error::UndefinedOverallNovelty) => None,
        Err(other) => return Err(other),
    };
    Ok(MetricReport {
        hd_raw,
        cd_raw,
        ci_raw,
        hd,
        cd,
        ci,
        on,
        neighbor_ids_historical,
        neighbor_ids_contemporary,
    })
}
