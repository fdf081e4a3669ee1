//! Embedding vectors and exact nearest-neighbor search.
//!
//! Search is an exhaustive scan under squared Euclidean distance with a
//! deterministic tie-break (ascending distance, then lexicographic id), so
//! results are identical across platforms and run counts. Corpora here stay
//! small enough (~10^5 vectors) that exact scan is the right tool; there is
//! deliberately no approximate index.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{jsonl, par};

/// Fixed-dimension embedding; all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEmbedding);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Σ_d (a_d − b_d)²; symmetric, zero iff the vectors coincide.
pub fn squared_euclidean(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(a.0
        .iter()
        .zip(b.0.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum())
}

/// Immutable id → vector store with a uniform dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingIndex {
    dim: usize,
    entries: BTreeMap<String, EmbeddingVector>,
}

#[derive(Serialize, Deserialize)]
struct SidecarRecord {
    dim: usize,
    id: String,
    values: Vec<f64>,
}

impl EmbeddingIndex {
    pub fn new(dim: usize) -> Self {
        EmbeddingIndex {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: EmbeddingVector) -> Result<()> {
        let id = id.into();
        if vector.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.dim(),
            });
        }
        if self.entries.contains_key(&id) {
            return Err(Error::DuplicateId {
                kind: "embedding",
                id,
            });
        }
        self.entries.insert(id, vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingVector> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    /// Loads the line-delimited sidecar `{dim, id, values}`, enforcing a
    /// uniform dimension, finite entries, and unique ids.
    pub fn load(path: &Path) -> Result<Self> {
        let records: Vec<(usize, SidecarRecord)> = jsonl::read_file(path)?;
        let mut index: Option<EmbeddingIndex> = None;
        for (line, record) in records {
            let fail = |message: String| Error::MalformedRecord {
                path: path.to_path_buf(),
                line,
                message,
            };
            if record.values.len() != record.dim {
                return Err(fail(format!(
                    "declared dim {} but {} values",
                    record.dim,
                    record.values.len()
                )));
            }
            let idx = index.get_or_insert_with(|| EmbeddingIndex::new(record.dim));
            if record.dim != idx.dim {
                return Err(fail(format!(
                    "dimension {} differs from index dimension {}",
                    record.dim, idx.dim
                )));
            }
            let vector = EmbeddingVector::new(record.values).map_err(|e| fail(e.to_string()))?;
            idx.insert(record.id, vector)?;
        }
        index.ok_or_else(|| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: 0,
            message: "sidecar contains no records".into(),
        })
    }

    /// Writes the canonical sidecar form (ids sorted, keys sorted).
    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_file(
            path,
            self.entries.iter().map(|(id, v)| SidecarRecord {
                dim: self.dim,
                id: id.clone(),
                values: v.0.clone(),
            }),
        )
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    distance: f64,
    id: String,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap on (distance, id): the root is the worst candidate kept.
        self.distance
            .total_cmp(&other.distance)
            .then_with(|| self.id.cmp(&other.id))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn select_k<'a>(
    candidates: impl Iterator<Item = (&'a String, &'a EmbeddingVector)>,
    query: &EmbeddingVector,
    k: usize,
) -> Result<Vec<(String, f64)>> {
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut seen_any = false;
    for (id, vector) in candidates {
        seen_any = true;
        let distance = squared_euclidean(query, vector)?;
        let entry = HeapEntry {
            distance,
            id: id.clone(),
        };
        if heap.len() < k {
            heap.push(entry);
        } else if let Some(worst) = heap.peek() {
            if entry < *worst {
                heap.pop();
                heap.push(entry);
            }
        }
    }
    if !seen_any {
        return Err(Error::EmptyEligibleSet);
    }
    let mut out: Vec<(String, f64)> = heap
        .into_sorted_vec()
        .into_iter()
        .map(|e| (e.id, e.distance))
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// The `min(k, |eligible|)` entries nearest to `query`, ascending by
/// `(distance, id)`. `exclude` removes ids from the eligible set.
pub fn top_k(
    index: &EmbeddingIndex,
    query: &EmbeddingVector,
    k: usize,
    exclude: Option<&BTreeSet<String>>,
) -> Result<Vec<(String, f64)>> {
    if query.dim() != index.dim {
        return Err(Error::DimensionMismatch {
            expected: index.dim,
            actual: query.dim(),
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    select_k(
        index
            .entries
            .iter()
            .filter(|(id, _)| exclude.is_none_or(|ex| !ex.contains(*id))),
        query,
        k,
    )
}

/// `top_k` restricted to `within`, optionally leaving one id out.
/// Every id in `within` must be present in the index.
pub(crate) fn top_k_within(
    index: &EmbeddingIndex,
    query: &EmbeddingVector,
    k: usize,
    within: &BTreeSet<String>,
    leave_out: Option<&str>,
) -> Result<Vec<(String, f64)>> {
    if query.dim() != index.dim {
        return Err(Error::DimensionMismatch {
            expected: index.dim,
            actual: query.dim(),
        });
    }
    let mut pairs = Vec::with_capacity(within.len());
    for id in within {
        if leave_out == Some(id.as_str()) {
            continue;
        }
        let vector = index
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding { id: id.clone() })?;
        pairs.push((id, vector));
    }
    select_k(pairs.into_iter(), query, k)
}

/// Runs `top_k` for every query, fanning out across queries when the
/// `parallel` feature is enabled. Output order matches query order.
pub fn top_k_batch(
    index: &EmbeddingIndex,
    queries: &[EmbeddingVector],
    k: usize,
    exclude: Option<&BTreeSet<String>>,
) -> Result<Vec<Vec<(String, f64)>>> {
    par::map_slice(queries, |q| top_k(index, q, k, exclude))
        .into_iter()
        .collect()
}

/// Coordinatewise arithmetic mean of the identified vectors.
pub fn centroid(index: &EmbeddingIndex, ids: &BTreeSet<String>) -> Result<EmbeddingVector> {
    if ids.is_empty() {
        return Err(Error::EmptyIdSet);
    }
    let mut sum = vec![0.0f64; index.dim];
    for id in ids {
        let vector = index
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding { id: id.clone() })?;
        for (acc, v) in sum.iter_mut().zip(vector.values()) {
            *acc += v;
        }
    }
    let n = ids.len() as f64;
    for acc in &mut sum {
        *acc /= n;
    }
    EmbeddingVector::new(sum)
}
