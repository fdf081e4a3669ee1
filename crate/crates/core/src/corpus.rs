//! Publication/researcher ecosystem: loading, validation, year splits, and
//! corpus-level baseline statistics.
//!
//! On-disk form is canonical line-delimited JSON (one entity per line, keys
//! sorted), so load→save→load is a fixpoint and byte-level comparisons are
//! meaningful across runs and platforms.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingIndex;
use crate::error::{Error, Result};
use crate::{jsonl, metrics, par, rng};

pub const YEAR_MIN: i32 = 1900;
pub const YEAR_MAX: i32 = 2100;

/// One literature record. The embedding lives in a sidecar keyed by `id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publication {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub year: i32,
    pub venue: String,
    pub citations: u64,
    pub author_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_id: Option<String>,
}

/// Agent seed profile: affiliations, topics, authored publications, and
/// symmetric collaborator counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Researcher {
    pub id: String,
    pub name: String,
    pub affiliations: Vec<String>,
    pub topics: Vec<String>,
    pub publication_ids: Vec<String>,
    pub collaborator_counts: BTreeMap<String, u64>,
}

/// Validated, immutable ecosystem. Safe for concurrent readers.
#[derive(Debug, Clone)]
pub struct Corpus {
    publications: BTreeMap<String, Publication>,
    researchers: BTreeMap<String, Researcher>,
}

impl Corpus {
    /// Builds a corpus from in-memory records, enforcing the same invariants
    /// as [`Corpus::load`].
    pub fn from_records(
        publications: Vec<Publication>,
        researchers: Vec<Researcher>,
    ) -> Result<Self> {
        let mut pub_map = BTreeMap::new();
        for publication in publications {
            validate_publication(&publication, None)?;
            let id = publication.id.clone();
            if pub_map.insert(id.clone(), publication).is_some() {
                return Err(Error::DuplicateId {
                    kind: "publication",
                    id,
                });
            }
        }
        let mut res_map = BTreeMap::new();
        for researcher in researchers {
            if res_map.contains_key(&researcher.id) {
                return Err(Error::DuplicateId {
                    kind: "researcher",
                    id: researcher.id,
                });
            }
            res_map.insert(researcher.id.clone(), researcher);
        }
        let corpus = Corpus {
            publications: pub_map,
            researchers: res_map,
        };
        corpus.validate_references()?;
        Ok(corpus)
    }

    /// Loads and validates the two line-delimited record files.
    pub fn load(publications_path: &Path, researchers_path: &Path) -> Result<Self> {
        let mut publications = BTreeMap::new();
        for (line, publication) in jsonl::read_file::<Publication>(publications_path)? {
            validate_publication(&publication, Some((publications_path, line)))?;
            if publications
                .insert(publication.id.clone(), publication)
                .is_some()
            {
                return Err(Error::MalformedRecord {
                    path: publications_path.to_path_buf(),
                    line,
                    message: "duplicate publication id".into(),
                });
            }
        }
        let mut researchers = BTreeMap::new();
        for (line, researcher) in jsonl::read_file::<Researcher>(researchers_path)? {
            if researchers
                .insert(researcher.id.clone(), researcher)
                .is_some()
            {
                return Err(Error::MalformedRecord {
                    path: researchers_path.to_path_buf(),
                    line,
                    message: "duplicate researcher id".into(),
                });
            }
        }
        let corpus = Corpus {
            publications,
            researchers,
        };
        corpus.validate_references()?;
        Ok(corpus)
    }

    /// Writes the canonical on-disk form: one entity per line, ids ascending,
    /// keys sorted.
    pub fn save(&self, publications_path: &Path, researchers_path: &Path) -> Result<()> {
        jsonl::write_file(publications_path, self.publications.values())?;
        jsonl::write_file(researchers_path, self.researchers.values())
    }

    fn validate_references(&self) -> Result<()> {
        for publication in self.publications.values() {
            for author in &publication.author_ids {
                if !self.researchers.contains_key(author) {
                    return Err(Error::DanglingReference {
                        referrer_kind: "publication",
                        referrer: publication.id.clone(),
                        target_kind: "researcher",
                        target: author.clone(),
                    });
                }
            }
        }
        for researcher in self.researchers.values() {
            for publication_id in &researcher.publication_ids {
                if !self.publications.contains_key(publication_id) {
                    return Err(Error::DanglingReference {
                        referrer_kind: "researcher",
                        referrer: researcher.id.clone(),
                        target_kind: "publication",
                        target: publication_id.clone(),
                    });
                }
            }
            for (other_id, &count) in &researcher.collaborator_counts {
                let Some(other) = self.researchers.get(other_id) else {
                    return Err(Error::DanglingReference {
                        referrer_kind: "researcher",
                        referrer: researcher.id.clone(),
                        target_kind: "researcher",
                        target: other_id.clone(),
                    });
                };
                let reverse = other
                    .collaborator_counts
                    .get(&researcher.id)
                    .copied()
                    .unwrap_or(0);
                if reverse != count {
                    return Err(Error::AsymmetricCollaboration {
                        a: researcher.id.clone(),
                        b: other_id.clone(),
                        ab: count,
                        ba: reverse,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn publications(&self) -> &BTreeMap<String, Publication> {
        &self.publications
    }

    pub fn researchers(&self) -> &BTreeMap<String, Researcher> {
        &self.researchers
    }

    pub fn publication(&self, id: &str) -> Option<&Publication> {
        self.publications.get(id)
    }

    pub fn researcher(&self, id: &str) -> Option<&Researcher> {
        self.researchers.get(id)
    }
}

fn validate_publication(publication: &Publication, at: Option<(&Path, usize)>) -> Result<()> {
    let fail = |message: String| match at {
        Some((path, line)) => Error::MalformedRecord {
            path: path.to_path_buf(),
            line,
            message,
        },
        None => Error::Config(format!("publication `{}`: {message}", publication.id)),
    };
    if publication.abstract_text.trim().is_empty() {
        return Err(fail("abstract must be non-empty".into()));
    }
    if publication.year < YEAR_MIN || publication.year > YEAR_MAX {
        return Err(fail(format!(
            "year {} outside [{YEAR_MIN}, {YEAR_MAX}]",
            publication.year
        )));
    }
    Ok(())
}

/// Disjoint, exhaustive year partition: historical strictly before the pivot,
/// contemporary at or after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub historical: BTreeSet<String>,
    pub contemporary: BTreeSet<String>,
    pub pivot_year: i32,
}

pub fn split_by_year(corpus: &Corpus, pivot_year: i32) -> Result<CorpusSplit> {
    if !(YEAR_MIN..=YEAR_MAX).contains(&pivot_year) {
        return Err(Error::Config(format!(
            "pivot year {pivot_year} outside [{YEAR_MIN}, {YEAR_MAX}]"
        )));
    }
    let mut split = CorpusSplit {
        historical: BTreeSet::new(),
        contemporary: BTreeSet::new(),
        pivot_year,
    };
    for (id, publication) in corpus.publications() {
        if publication.year < pivot_year {
            split.historical.insert(id.clone());
        } else {
            split.contemporary.insert(id.clone());
        }
    }
    Ok(split)
}

/// Corpus-level normalization baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub mean_citations_contemporary: f64,
    pub baseline_mean_hd: f64,
    pub baseline_mean_cd: f64,
    pub baseline_mean_ci: f64,
    pub sample_size_used: usize,
}

/// How many corpus abstracts to evaluate when estimating baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineSample {
    All,
    Size(usize),
}

/// Evaluates the raw dissimilarity/impact metrics for each sampled corpus
/// abstract with leave-self-out retrieval and averages them.
///
/// Deterministic given `seed`; with `BaselineSample::All` the result is
/// independent of input order (evaluation iterates ids in sorted order).
pub fn compute_stats(
    corpus: &Corpus,
    split: &CorpusSplit,
    index: &EmbeddingIndex,
    baseline_sample: BaselineSample,
    seed: u64,
) -> Result<CorpusStats> {
    if split.historical.is_empty() {
        return Err(Error::EmptySplit {
            side: "historical",
        });
    }
    if split.contemporary.is_empty() {
        return Err(Error::EmptySplit {
            side: "contemporary",
        });
    }
    for id in split.historical.iter().chain(&split.contemporary) {
        if !index.contains(id) {
            return Err(Error::MissingEmbedding { id: id.clone() });
        }
    }

    let all_ids: Vec<&String> = corpus.publications().keys().collect();
    let sampled: Vec<&String> = match baseline_sample {
        BaselineSample::All => all_ids,
        BaselineSample::Size(size) if size >= all_ids.len() => all_ids,
        BaselineSample::Size(size) => {
            let mut stream = rng::stream(seed, "baseline-sample");
            let mut chosen: Vec<&String> =
                rand::seq::index::sample(&mut stream, all_ids.len(), size)
                    .into_iter()
                    .map(|i| all_ids[i])
                    .collect();
            chosen.sort();
            chosen
        }
    };

    let evaluated: Vec<Result<(f64, f64, f64)>> = par::map_slice(&sampled, |id| {
        let query = index
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding { id: (*id).clone() })?;
        let (hd, _) = metrics::historical_dissimilarity(query, index, split, Some(id))?;
        let (cd, contemporary_neighbors) =
            metrics::contemporary_dissimilarity(query, index, split, Some(id))?;
        let ci = metrics::contemporary_impact(&contemporary_neighbors, corpus)?;
        Ok((hd, cd, ci))
    });

    let mut hd_sum = 0.0;
    let mut cd_sum = 0.0;
    let mut ci_sum = 0.0;
    let count = evaluated.len();
    for result in evaluated {
        let (hd, cd, ci) = result?;
        hd_sum += hd;
        cd_sum += cd;
        ci_sum += ci;
    }

    let citation_sum: u64 = split
        .contemporary
        .iter()
        .map(|id| corpus.publication(id).map(|p| p.citations).unwrap_or(0))
        .sum();

    Ok(CorpusStats {
        mean_citations_contemporary: citation_sum as f64 / split.contemporary.len() as f64,
        baseline_mean_hd: hd_sum / count as f64,
        baseline_mean_cd: cd_sum / count as f64,
        baseline_mean_ci: ci_sum / count as f64,
        sample_size_used: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingVector;

    fn publication(id: &str, year: i32, citations: u64, authors: &[&str]) -> Publication {
        Publication {
            id: id.into(),
            title: format!("Title {id}"),
            abstract_text: format!("Abstract body for {id}."),
            year,
            venue: "Venue".into(),
            citations,
            author_ids: authors.iter().map(|a| a.to_string()).collect(),
            external_id: None,
        }
    }

    fn researcher(id: &str, pubs: &[&str], collaborators: &[(&str, u64)]) -> Researcher {
        Researcher {
            id: id.into(),
            name: format!("Name {id}"),
            affiliations: vec!["Lab".into()],
            topics: vec!["topic-a".into()],
            publication_ids: pubs.iter().map(|p| p.to_string()).collect(),
            collaborator_counts: collaborators
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }

    #[test]
    fn minimal_corpus_loads() {
        let dir = tempfile::tempdir().unwrap();
        let pubs = dir.path().join("pubs.ldjson");
        let res = dir.path().join("res.ldjson");
        let corpus = Corpus::from_records(
            vec![publication("p1", 2000, 7, &["r1"])],
            vec![researcher("r1", &["p1"], &[])],
        )
        .unwrap();
        corpus.save(&pubs, &res).unwrap();
        let loaded = Corpus::load(&pubs, &res).unwrap();
        assert_eq!(loaded.publications().len(), 1);
        assert_eq!(loaded.researchers().len(), 1);
    }

    #[test]
    fn dangling_author_reference_rejected() {
        let err = Corpus::from_records(vec![publication("p1", 2000, 7, &["ghost"])], vec![])
            .unwrap_err();
        assert!(matches!(err, Error::DanglingReference { .. }));
    }

    #[test]
    fn dangling_publication_reference_rejected() {
        let err = Corpus::from_records(vec![], vec![researcher("r1", &["ghost"], &[])])
            .unwrap_err();
        assert!(matches!(err, Error::DanglingReference { .. }));
    }

    #[test]
    fn asymmetric_collaboration_rejected() {
        let err = Corpus::from_records(
            vec![],
            vec![
                researcher("r1", &[], &[("r2", 3)]),
                researcher("r2", &[], &[("r1", 1)]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::AsymmetricCollaboration { ab: 3, ba: 1, .. }));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let pubs = dir.path().join("pubs.ldjson");
        let res = dir.path().join("res.ldjson");
        std::fs::write(&res, "").unwrap();
        let good = jsonl::canonical_line(&publication("p1", 2000, 7, &[])).unwrap();
        std::fs::write(&pubs, format!("{good}\nnot json\n")).unwrap();
        match Corpus::load(&pubs, &res) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn empty_abstract_and_bad_year_rejected_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let pubs = dir.path().join("pubs.ldjson");
        let res = dir.path().join("res.ldjson");
        std::fs::write(&res, "").unwrap();
        let mut record = publication("p1", 2000, 7, &[]);
        record.abstract_text = "  ".into();
        std::fs::write(&pubs, format!("{}\n", jsonl::canonical_line(&record).unwrap())).unwrap();
        assert!(matches!(
            Corpus::load(&pubs, &res),
            Err(Error::MalformedRecord { line: 1, .. })
        ));

        let mut record = publication("p1", 1899, 7, &[]);
        record.year = 1899;
        std::fs::write(&pubs, format!("{}\n", jsonl::canonical_line(&record).unwrap())).unwrap();
        assert!(matches!(
            Corpus::load(&pubs, &res),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
    }

    /// A health-sciences record with an external PMID round-trips through the
    /// canonical form byte-equivalently.
    #[test]
    fn canonical_roundtrip_is_byte_exact() {
        let dir = tempfile::tempdir().unwrap();
        let pubs = dir.path().join("pubs.ldjson");
        let res = dir.path().join("res.ldjson");

        let pub_line = concat!(
            "{\"abstract\":\"The objects of this study were (1) to review systematically a theory ",
            "of collective drinking behaviour, and (2) to give examples of how the theory has been ",
            "empirically tested.\",\"author_ids\":[\"gmel-g\",\"rehm-j\"],\"citations\":7,",
            "\"external_id\":\"28474448\",\"id\":\"pmid-28474448\",",
            "\"title\":\"The empirical testability of a theory of collective drinking behaviour.\",",
            "\"venue\":\"Drug and alcohol review\",\"year\":2000}\n"
        );
        let res_lines = concat!(
            "{\"affiliations\":[\"Swiss Institute for the Prevention of Alcohol Problems\"],",
            "\"collaborator_counts\":{\"rehm-j\":1},\"id\":\"gmel-g\",\"name\":\"Gmel G\",",
            "\"publication_ids\":[\"pmid-28474448\"],\"topics\":[\"alcohol epidemiology\"]}\n",
            "{\"affiliations\":[\"Addiction Research Foundation\"],",
            "\"collaborator_counts\":{\"gmel-g\":1},\"id\":\"rehm-j\",\"name\":\"Rehm J\",",
            "\"publication_ids\":[\"pmid-28474448\"],\"topics\":[\"public health\"]}\n"
        );
        std::fs::write(&pubs, pub_line).unwrap();
        std::fs::write(&res, res_lines).unwrap();

        let corpus = Corpus::load(&pubs, &res).unwrap();
        let publication = corpus.publication("pmid-28474448").unwrap();
        assert_eq!(publication.year, 2000);
        assert_eq!(publication.citations, 7);
        assert_eq!(publication.external_id.as_deref(), Some("28474448"));

        let pubs2 = dir.path().join("pubs2.ldjson");
        let res2 = dir.path().join("res2.ldjson");
        corpus.save(&pubs2, &res2).unwrap();
        assert_eq!(std::fs::read(&pubs).unwrap(), std::fs::read(&pubs2).unwrap());
        assert_eq!(std::fs::read(&res).unwrap(), std::fs::read(&res2).unwrap());
    }

    #[test]
    fn load_save_load_is_fixpoint() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::from_records(
            vec![
                publication("p2", 2014, 12, &["r1"]),
                publication("p1", 2005, 3, &["r1", "r2"]),
            ],
            vec![
                researcher("r2", &["p1"], &[("r1", 1)]),
                researcher("r1", &["p1", "p2"], &[("r2", 1)]),
            ],
        )
        .unwrap();
        let a_pubs = dir.path().join("a_pubs.ldjson");
        let a_res = dir.path().join("a_res.ldjson");
        corpus.save(&a_pubs, &a_res).unwrap();
        let reloaded = Corpus::load(&a_pubs, &a_res).unwrap();
        let b_pubs = dir.path().join("b_pubs.ldjson");
        let b_res = dir.path().join("b_res.ldjson");
        reloaded.save(&b_pubs, &b_res).unwrap();
        assert_eq!(std::fs::read(&a_pubs).unwrap(), std::fs::read(&b_pubs).unwrap());
        assert_eq!(std::fs::read(&a_res).unwrap(), std::fs::read(&b_res).unwrap());
    }

    #[test]
    fn split_examples() {
        let corpus = Corpus::from_records(
            vec![
                publication("p2000", 2000, 0, &[]),
                publication("p2005", 2005, 0, &[]),
                publication("p2011", 2011, 0, &[]),
                publication("p2014", 2014, 0, &[]),
            ],
            vec![],
        )
        .unwrap();
        let split = split_by_year(&corpus, 2011).unwrap();
        assert!(split.historical.contains("p2000"));
        assert!(split.historical.contains("p2005"));
        assert!(split.contemporary.contains("p2011"), "boundary year is contemporary");
        assert!(split.contemporary.contains("p2014"));
        let union: BTreeSet<_> = split.historical.union(&split.contemporary).collect();
        assert_eq!(union.len(), corpus.publications().len());
        assert!(split.historical.is_disjoint(&split.contemporary));
    }

    fn toy_indexed_corpus() -> (Corpus, CorpusSplit, EmbeddingIndex) {
        let corpus = Corpus::from_records(
            vec![
                publication("p1", 2005, 2, &[]),
                publication("p2", 2005, 4, &[]),
                publication("p3", 2014, 6, &[]),
                publication("p4", 2014, 10, &[]),
            ],
            vec![],
        )
        .unwrap();
        let split = split_by_year(&corpus, 2011).unwrap();
        let mut index = EmbeddingIndex::new(2);
        index.insert("p1", EmbeddingVector::new(vec![0.0, 0.0]).unwrap()).unwrap();
        index.insert("p2", EmbeddingVector::new(vec![1.0, 0.0]).unwrap()).unwrap();
        index.insert("p3", EmbeddingVector::new(vec![3.0, 0.0]).unwrap()).unwrap();
        index.insert("p4", EmbeddingVector::new(vec![6.0, 0.0]).unwrap()).unwrap();
        (corpus, split, index)
    }

    /// Hand-computed leave-one-out baselines for the 4-publication toy corpus:
    /// per-publication (hd, cd, ci) are (1, 22.5, 8), (1, 14.5, 8),
    /// (6.5, 9, 10), (30.5, 9, 6).
    #[test]
    fn compute_stats_matches_hand_enumeration() {
        let (corpus, split, index) = toy_indexed_corpus();
        let stats = compute_stats(&corpus, &split, &index, BaselineSample::All, 0).unwrap();
        assert!((stats.baseline_mean_hd - 9.75).abs() < 1e-12);
        assert!((stats.baseline_mean_cd - 13.75).abs() < 1e-12);
        assert!((stats.baseline_mean_ci - 8.0).abs() < 1e-12);
        assert!((stats.mean_citations_contemporary - 8.0).abs() < 1e-12);
        assert_eq!(stats.sample_size_used, 4);
    }

    #[test]
    fn constant_contemporary_citations_mean() {
        let corpus = Corpus::from_records(
            vec![
                publication("h1", 2000, 1, &[]),
                publication("h2", 2001, 2, &[]),
                publication("c1", 2012, 7, &[]),
                publication("c2", 2013, 7, &[]),
                publication("c3", 2015, 7, &[]),
            ],
            vec![],
        )
        .unwrap();
        let split = split_by_year(&corpus, 2011).unwrap();
        let mut index = EmbeddingIndex::new(1);
        for (i, id) in ["h1", "h2", "c1", "c2", "c3"].iter().enumerate() {
            index.insert(*id, EmbeddingVector::new(vec![i as f64]).unwrap()).unwrap();
        }
        let stats = compute_stats(&corpus, &split, &index, BaselineSample::All, 0).unwrap();
        assert_eq!(stats.mean_citations_contemporary, 7.0);
    }

    #[test]
    fn sampled_stats_are_deterministic() {
        let (corpus, split, index) = toy_indexed_corpus();
        let a = compute_stats(&corpus, &split, &index, BaselineSample::Size(2), 99).unwrap();
        let b = compute_stats(&corpus, &split, &index, BaselineSample::Size(2), 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample_size_used, 2);
    }

    #[test]
    fn stats_error_on_empty_side() {
        let corpus = Corpus::from_records(vec![publication("p1", 2000, 1, &[])], vec![]).unwrap();
        let split = split_by_year(&corpus, 2011).unwrap();
        let mut index = EmbeddingIndex::new(1);
        index.insert("p1", EmbeddingVector::new(vec![0.0]).unwrap()).unwrap();
        assert!(matches!(
            compute_stats(&corpus, &split, &index, BaselineSample::All, 0),
            Err(Error::EmptySplit { side: "contemporary" })
        ));
    }

    /// With `All`, baselines do not depend on the order records arrived in.
    #[test]
    fn all_sample_is_permutation_invariant() {
        let records = vec![
            publication("p1", 2005, 2, &[]),
            publication("p2", 2005, 4, &[]),
            publication("p3", 2014, 6, &[]),
            publication("p4", 2014, 10, &[]),
        ];
        let mut reversed = records.clone();
        reversed.reverse();
        let corpus_a = Corpus::from_records(records, vec![]).unwrap();
        let corpus_b = Corpus::from_records(reversed, vec![]).unwrap();
        let split_a = split_by_year(&corpus_a, 2011).unwrap();
        let split_b = split_by_year(&corpus_b, 2011).unwrap();
        let (_, _, index) = toy_indexed_corpus();
        let a = compute_stats(&corpus_a, &split_a, &index, BaselineSample::All, 0).unwrap();
        let b = compute_stats(&corpus_b, &split_b, &index, BaselineSample::All, 1).unwrap();
        assert_eq!(a, b);
    }
}
