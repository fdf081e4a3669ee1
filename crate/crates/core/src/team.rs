//! Team assembly: collaboration matrix, knowledge profiles, diversity, and
//! seeded team sampling.
//!
//! Sampling draws the leader uniformly, then each scientist with probability
//! proportional to accumulated (smoothed) co-authorship with the already
//! selected members. Smoothing adds 1 to every off-diagonal count so that
//! never-collaborated candidates stay reachable. A post-pass re-draws slots
//! until the requested fraction of scientists has a primary topic distinct
//! from the leader's.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embed::{self, EmbeddingIndex, EmbeddingVector};
use crate::error::{Error, Result};
use crate::rng;

/// Symmetric co-authorship counts over an ordered id list. The diagonal is
/// fixed at 0 and ignored by sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct CollaborationMatrix {
    ids: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl CollaborationMatrix {
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|probe| probe.as_str().cmp(id)).ok()
    }

    pub fn count(&self, a: usize, b: usize) -> u64 {
        self.counts[a][b]
    }

    pub fn is_smoothed(&self) -> bool {
        let n = self.ids.len();
        (0..n).all(|i| (0..n).all(|j| i == j || self.counts[i][j] >= 1))
    }
}

/// Counts co-authored publications for every researcher pair.
pub fn build_matrix(corpus: &Corpus) -> CollaborationMatrix {
    let ids: Vec<String> = corpus.researchers().keys().cloned().collect();
    let index_of: BTreeMap<&str, usize> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let n = ids.len();
    let mut counts = vec![vec![0u64; n]; n];
    for publication in corpus.publications().values() {
        let mut authors: Vec<usize> = publication
            .author_ids
            .iter()
            .filter_map(|a| index_of.get(a.as_str()).copied())
            .collect();
        authors.sort_unstable();
        authors.dedup();
        for (k, &i) in authors.iter().enumerate() {
            for &j in &authors[k + 1..] {
                counts[i][j] += 1;
                counts[j][i] += 1;
            }
        }
    }
    CollaborationMatrix { ids, counts }
}

/// Adds exactly 1 to every off-diagonal entry; the diagonal stays 0.
pub fn smooth(matrix: &CollaborationMatrix) -> CollaborationMatrix {
    let mut counts = matrix.counts.clone();
    for (i, row) in counts.iter_mut().enumerate() {
        for (j, count) in row.iter_mut().enumerate() {
            if i != j {
                *count += 1;
            }
        }
    }
    CollaborationMatrix {
        ids: matrix.ids.clone(),
        counts,
    }
}

/// A researcher's knowledge base realized as a publication-centroid embedding
/// plus topic tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeProfile {
    pub researcher_id: String,
    pub centroid: EmbeddingVector,
    pub publication_count: usize,
    pub topic_tags: Vec<String>,
}

impl KnowledgeProfile {
    /// Most frequent topic tag; ties resolve to the earliest occurrence.
    pub fn primary_topic(&self) -> Option<&str> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for tag in &self.topic_tags {
            *counts.entry(tag.as_str()).or_insert(0) += 1;
        }
        let best = counts.values().copied().max()?;
        self.topic_tags
            .iter()
            .find(|tag| counts[tag.as_str()] == best)
            .map(|s| s.as_str())
    }
}

/// Builds the knowledge profile for one researcher from their embedded
/// publication abstracts.
pub fn knowledge_profile(
    corpus: &Corpus,
    index: &EmbeddingIndex,
    researcher_id: &str,
) -> Result<KnowledgeProfile> {
    let researcher = corpus
        .researcher(researcher_id)
        .ok_or_else(|| Error::MissingProfile {
            id: researcher_id.to_string(),
        })?;
    let embedded: BTreeSet<String> = researcher
        .publication_ids
        .iter()
        .filter(|id| index.contains(id))
        .cloned()
        .collect();
    if embedded.is_empty() {
        return Err(Error::NoEmbeddedPublications {
            id: researcher_id.to_string(),
        });
    }
    Ok(KnowledgeProfile {
        researcher_id: researcher_id.to_string(),
        centroid: embed::centroid(index, &embedded)?,
        publication_count: researcher.publication_ids.len(),
        topic_tags: researcher.topics.clone(),
    })
}

/// Squared Euclidean distance between two knowledge-base centroids.
pub fn knowledge_distance(p: &KnowledgeProfile, q: &KnowledgeProfile) -> Result<f64> {
    embed::squared_euclidean(&p.centroid, &q.centroid)
}

/// Ordered roster with a designated leader and per-member profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Team {
    pub leader: String,
    pub scientists: Vec<String>,
    pub profiles: BTreeMap<String, KnowledgeProfile>,
}

impl Team {
    pub fn new(
        leader: String,
        scientists: Vec<String>,
        profiles: BTreeMap<String, KnowledgeProfile>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        seen.insert(leader.clone());
        for scientist in &scientists {
            if !seen.insert(scientist.clone()) {
                return Err(Error::Config(format!(
                    "team member `{scientist}` appears twice"
                )));
            }
        }
        if seen.len() < 3 {
            return Err(Error::Config(format!(
                "team needs at least 3 members, got {}",
                seen.len()
            )));
        }
        for member in &seen {
            if !profiles.contains_key(member) {
                return Err(Error::MissingProfile { id: member.clone() });
            }
        }
        Ok(Team {
            leader,
            scientists,
            profiles,
        })
    }

    pub fn size(&self) -> usize {
        1 + self.scientists.len()
    }

    /// Leader first, scientists in draw order.
    pub fn roster(&self) -> Vec<&str> {
        std::iter::once(self.leader.as_str())
            .chain(self.scientists.iter().map(|s| s.as_str()))
            .collect()
    }

    pub fn profile(&self, id: &str) -> Result<&KnowledgeProfile> {
        self.profiles
            .get(id)
            .ok_or_else(|| Error::MissingProfile { id: id.to_string() })
    }
}

/// Sum of pairwise knowledge distances over unordered member pairs.
///
/// Pairs are visited in sorted-id order, so the value is exactly invariant
/// under any permutation of the roster.
pub fn team_diversity(team: &Team) -> Result<f64> {
    let mut members: Vec<&str> = team.roster();
    members.sort_unstable();
    let mut total = 0.0;
    for (k, a) in members.iter().enumerate() {
        for b in &members[k + 1..] {
            total += knowledge_distance(team.profile(a)?, team.profile(b)?)?;
        }
    }
    Ok(total)
}

fn weighted_draw(rng: &mut impl Rng, weights: &[(usize, u64)]) -> usize {
    let total: u64 = weights.iter().map(|(_, w)| w).sum();
    debug_assert!(total > 0);
    let mut x = rng.gen_range(0..total);
    for &(candidate, weight) in weights {
        if x < weight {
            return candidate;
        }
        x -= weight;
    }
    weights.last().expect("non-empty weights").0
}

/// Samples a team of `size` members from the researchers in `profiles`.
///
/// `diversity_fraction` is the minimum fraction of scientists whose primary
/// topic differs from the leader's; violating slots are re-drawn from
/// distinct-topic candidates. Deterministic given `seed`.
pub fn sample_team(
    matrix: &CollaborationMatrix,
    profiles: &BTreeMap<String, KnowledgeProfile>,
    size: usize,
    diversity_fraction: f64,
    seed: u64,
) -> Result<Team> {
    if size < 3 {
        return Err(Error::Config(format!(
            "team size must be at least 3, got {size}"
        )));
    }
    if !(0.0..=1.0).contains(&diversity_fraction) {
        return Err(Error::Config(format!(
            "diversity fraction must lie in [0, 1], got {diversity_fraction}"
        )));
    }
    if !matrix.is_smoothed() {
        return Err(Error::MatrixNotSmoothed);
    }
    let pool: Vec<usize> = matrix
        .ids
        .iter()
        .enumerate()
        .filter(|(_, id)| profiles.contains_key(*id))
        .map(|(i, _)| i)
        .collect();
    if pool.len() < size {
        return Err(Error::PoolTooSmall {
            available: pool.len(),
            needed: size,
        });
    }

    let mut stream = rng::stream(seed, "team-sample");
    let leader = pool[stream.gen_range(0..pool.len())];
    let leader_tag = profiles[&matrix.ids[leader]]
        .primary_topic()
        .unwrap_or_default()
        .to_string();

    let distinct_tag = |candidate: usize| -> bool {
        profiles[&matrix.ids[candidate]]
            .primary_topic()
            .unwrap_or_default()
            != leader_tag
    };

    let required = (diversity_fraction * (size - 1) as f64).ceil() as usize;
    let available_distinct = pool
        .iter()
        .filter(|&&c| c != leader && distinct_tag(c))
        .count();
    if available_distinct < required {
        return Err(Error::InfeasibleDiversity {
            required,
            available: available_distinct,
        });
    }

    let mut selected: BTreeSet<usize> = BTreeSet::new();
    selected.insert(leader);
    let mut scientists: Vec<usize> = Vec::with_capacity(size - 1);

    let weights_for = |selected: &BTreeSet<usize>, eligible: &dyn Fn(usize) -> bool| {
        pool.iter()
            .filter(|&&c| !selected.contains(&c) && eligible(c))
            .map(|&c| (c, selected.iter().map(|&s| matrix.counts[s][c]).sum::<u64>()))
            .collect::<Vec<(usize, u64)>>()
    };

    for _ in 0..size - 1 {
        let weights = weights_for(&selected, &|_| true);
        let chosen = weighted_draw(&mut stream, &weights);
        selected.insert(chosen);
        scientists.push(chosen);
    }

    loop {
        let distinct = scientists.iter().filter(|&&s| distinct_tag(s)).count();
        if distinct >= required {
            break;
        }
        let slot = scientists
            .iter()
            .position(|&s| !distinct_tag(s))
            .expect("deficit implies a same-topic slot");
        let removed = scientists[slot];
        selected.remove(&removed);
        let weights = weights_for(&selected, &|c| distinct_tag(c));
        let replacement = weighted_draw(&mut stream, &weights);
        selected.insert(replacement);
        scientists[slot] = replacement;
    }

    let leader_id = matrix.ids[leader].clone();
    let scientist_ids: Vec<String> = scientists.iter().map(|&s| matrix.ids[s].clone()).collect();
    let mut team_profiles = BTreeMap::new();
    for id in std::iter::once(&leader_id).chain(&scientist_ids) {
        team_profiles.insert(id.clone(), profiles[id].clone());
    }
    Team::new(leader_id, scientist_ids, team_profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Publication, Researcher};

    fn publication(id: &str, authors: &[&str]) -> Publication {
        Publication {
            id: id.into(),
            title: format!("Title {id}"),
            abstract_text: format!("Abstract {id}."),
            year: 2010,
            venue: "Venue".into(),
            citations: 0,
            author_ids: authors.iter().map(|a| a.to_string()).collect(),
            external_id: None,
        }
    }

    fn researcher(id: &str, pubs: &[&str], topics: &[&str]) -> Researcher {
        Researcher {
            id: id.into(),
            name: format!("Name {id}"),
            affiliations: vec![],
            topics: topics.iter().map(|t| t.to_string()).collect(),
            publication_ids: pubs.iter().map(|p| p.to_string()).collect(),
            collaborator_counts: BTreeMap::new(),
        }
    }

    fn profile(id: &str, centroid: Vec<f64>, topics: &[&str]) -> KnowledgeProfile {
        KnowledgeProfile {
            researcher_id: id.into(),
            centroid: EmbeddingVector::new(centroid).unwrap(),
            publication_count: 1,
            topic_tags: topics.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn matrix_counts_shared_papers() {
        let corpus = Corpus::from_records(
            vec![publication("p1", &["r1", "r2"]), publication("p2", &["r2"])],
            vec![
                researcher("r1", &["p1"], &[]),
                researcher("r2", &["p1", "p2"], &[]),
            ],
        )
        .unwrap();
        let matrix = build_matrix(&corpus);
        let i = matrix.index_of("r1").unwrap();
        let j = matrix.index_of("r2").unwrap();
        assert_eq!(matrix.count(i, j), 1);
        assert_eq!(matrix.count(j, i), 1);
        assert_eq!(matrix.count(i, i), 0);
    }

    #[test]
    fn loner_has_zero_row() {
        let corpus = Corpus::from_records(
            vec![publication("p1", &["r1"])],
            vec![researcher("r1", &["p1"], &[]), researcher("r2", &[], &[])],
        )
        .unwrap();
        let matrix = build_matrix(&corpus);
        let lone = matrix.index_of("r2").unwrap();
        for j in 0..matrix.ids().len() {
            assert_eq!(matrix.count(lone, j), 0);
        }
    }

    /// Oracle: |pubs(i) ∩ pubs(j)| computed from author lists directly.
    #[test]
    fn matrix_matches_pairwise_intersection_oracle() {
        let corpus = Corpus::from_records(
            vec![
                publication("p1", &["r1", "r2", "r3"]),
                publication("p2", &["r1", "r2"]),
                publication("p3", &["r3", "r4"]),
                publication("p4", &["r5"]),
                publication("p5", &["r2", "r3"]),
            ],
            (1..=5)
                .map(|i| researcher(&format!("r{i}"), &[], &[]))
                .collect(),
        )
        .unwrap();
        let matrix = build_matrix(&corpus);
        for (i, a) in matrix.ids().iter().enumerate() {
            for (j, b) in matrix.ids().iter().enumerate() {
                if i == j {
                    continue;
                }
                let oracle = corpus
                    .publications()
                    .values()
                    .filter(|p| {
                        p.author_ids.iter().any(|x| x == a) && p.author_ids.iter().any(|x| x == b)
                    })
                    .count() as u64;
                assert_eq!(matrix.count(i, j), oracle, "pair ({a}, {b})");
            }
        }
    }

    #[test]
    fn smooth_adds_one_off_diagonal() {
        let corpus = Corpus::from_records(
            vec![publication("p1", &["r1", "r2"]); 7]
                .into_iter()
                .enumerate()
                .map(|(i, mut p)| {
                    p.id = format!("p{i}");
                    p
                })
                .collect(),
            vec![
                researcher("r1", &[], &[]),
                researcher("r2", &[], &[]),
                researcher("r3", &[], &[]),
            ],
        )
        .unwrap();
        let matrix = build_matrix(&corpus);
        let smoothed = smooth(&matrix);
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert_eq!(smoothed.count(i, j), 0);
                } else {
                    assert_eq!(smoothed.count(i, j), matrix.count(i, j) + 1);
                    assert_eq!(smoothed.count(i, j), smoothed.count(j, i));
                }
            }
        }
        let i = matrix.index_of("r1").unwrap();
        let j = matrix.index_of("r2").unwrap();
        assert_eq!(matrix.count(i, j), 7);
        assert_eq!(smoothed.count(i, j), 8);
        assert!(smoothed.is_smoothed());
        assert!(!matrix.is_smoothed());
    }

    #[test]
    fn profile_centroid_examples() {
        let corpus = Corpus::from_records(
            vec![publication("p1", &["r1"]), publication("p2", &["r1"])],
            vec![researcher("r1", &["p1", "p2"], &["t"])],
        )
        .unwrap();
        let mut index = EmbeddingIndex::new(2);
        index.insert("p1", EmbeddingVector::new(vec![0.0, 0.0]).unwrap()).unwrap();
        index.insert("p2", EmbeddingVector::new(vec![2.0, 0.0]).unwrap()).unwrap();
        let profile = knowledge_profile(&corpus, &index, "r1").unwrap();
        assert_eq!(profile.centroid.values(), &[1.0, 0.0]);
        assert_eq!(profile.publication_count, 2);
    }

    #[test]
    fn single_publication_profile_is_that_embedding() {
        let corpus = Corpus::from_records(
            vec![publication("p1", &["r1"])],
            vec![researcher("r1", &["p1"], &["t"])],
        )
        .unwrap();
        let mut index = EmbeddingIndex::new(2);
        index.insert("p1", EmbeddingVector::new(vec![0.75, -0.25]).unwrap()).unwrap();
        let profile = knowledge_profile(&corpus, &index, "r1").unwrap();
        assert_eq!(profile.centroid, *index.get("p1").unwrap());
        assert_eq!(profile.publication_count, 1);
    }

    #[test]
    fn profile_without_embeddings_errors() {
        let corpus = Corpus::from_records(
            vec![publication("p1", &["r1"])],
            vec![researcher("r1", &["p1"], &[])],
        )
        .unwrap();
        let index = EmbeddingIndex::new(2);
        assert!(matches!(
            knowledge_profile(&corpus, &index, "r1"),
            Err(Error::NoEmbeddedPublications { .. })
        ));
    }

    #[test]
    fn knowledge_distance_examples() {
        let p = profile("a", vec![0.0, 0.0], &[]);
        let q = profile("b", vec![1.0, 0.0], &[]);
        assert_eq!(knowledge_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(knowledge_distance(&p, &q).unwrap(), 1.0);
    }

    fn three_member_team() -> Team {
        let profiles: BTreeMap<String, KnowledgeProfile> = [
            ("a".to_string(), profile("a", vec![0.0, 0.0], &["t"])),
            ("b".to_string(), profile("b", vec![1.0, 0.0], &["t"])),
            ("c".to_string(), profile("c", vec![0.0, 1.0], &["t"])),
        ]
        .into();
        Team::new("a".into(), vec!["b".into(), "c".into()], profiles).unwrap()
    }

    #[test]
    fn diversity_forced_example() {
        // pairs: (0,0)-(1,0)=1, (0,0)-(0,1)=1, (1,0)-(0,1)=2 -> 4
        assert_eq!(team_diversity(&three_member_team()).unwrap(), 4.0);
    }

    #[test]
    fn diversity_zero_iff_identical() {
        let profiles: BTreeMap<String, KnowledgeProfile> = ["a", "b", "c"]
            .iter()
            .map(|id| ((*id).to_string(), profile(id, vec![0.5, 0.5], &["t"])))
            .collect();
        let team = Team::new("a".into(), vec!["b".into(), "c".into()], profiles).unwrap();
        assert_eq!(team_diversity(&team).unwrap(), 0.0);
    }

    #[test]
    fn diversity_is_permutation_invariant_and_matches_double_loop() {
        let mut stream = rng::stream(3, "team-test");
        let ids = ["a", "b", "c", "d", "e", "f"];
        let profiles: BTreeMap<String, KnowledgeProfile> = ids
            .iter()
            .map(|id| {
                let centroid: Vec<f64> = (0..4).map(|_| stream.gen_range(-1.0..1.0)).collect();
                ((*id).to_string(), profile(id, centroid, &["t"]))
            })
            .collect();
        let team_a = Team::new(
            "a".into(),
            vec!["b".into(), "c".into(), "d".into(), "e".into(), "f".into()],
            profiles.clone(),
        )
        .unwrap();
        let team_b = Team::new(
            "f".into(),
            vec!["e".into(), "d".into(), "c".into(), "b".into(), "a".into()],
            profiles.clone(),
        )
        .unwrap();
        let diversity = team_diversity(&team_a).unwrap();
        assert_eq!(diversity, team_diversity(&team_b).unwrap());

        // brute-force double loop over ordered pairs, halved
        let mut double = 0.0;
        for a in &ids {
            for b in &ids {
                if a != b {
                    double += knowledge_distance(&profiles[*a], &profiles[*b]).unwrap();
                }
            }
        }
        assert!((diversity - double / 2.0).abs() < 1e-9);
    }

    fn pool_fixture(topics: &[&str]) -> (CollaborationMatrix, BTreeMap<String, KnowledgeProfile>) {
        let ids: Vec<String> = (0..topics.len()).map(|i| format!("r{i:02}")).collect();
        let researchers: Vec<Researcher> = ids
            .iter()
            .zip(topics)
            .map(|(id, topic)| researcher(id, &[], &[topic]))
            .collect();
        let corpus = Corpus::from_records(vec![], researchers).unwrap();
        let matrix = smooth(&build_matrix(&corpus));
        let profiles: BTreeMap<String, KnowledgeProfile> = ids
            .iter()
            .zip(topics)
            .enumerate()
            .map(|(i, (id, topic))| {
                (id.clone(), profile(id, vec![i as f64, 0.0], &[topic]))
            })
            .collect();
        (matrix, profiles)
    }

    #[test]
    fn pool_of_exactly_n_is_forced() {
        let (matrix, profiles) = pool_fixture(&["t", "t", "t", "t"]);
        for seed in 0..10 {
            let team = sample_team(&matrix, &profiles, 4, 0.0, seed).unwrap();
            let mut members: Vec<&str> = team.roster();
            members.sort_unstable();
            assert_eq!(members, vec!["r00", "r01", "r02", "r03"]);
        }
    }

    #[test]
    fn single_topic_pool_diversity_bounds() {
        let (matrix, profiles) = pool_fixture(&["t", "t", "t", "t", "t"]);
        assert!(sample_team(&matrix, &profiles, 4, 0.0, 1).is_ok());
        assert!(matches!(
            sample_team(&matrix, &profiles, 4, 1.0, 1),
            Err(Error::InfeasibleDiversity { required: 3, available: 0 })
        ));
    }

    #[test]
    fn unsmoothed_matrix_rejected() {
        let (matrix, profiles) = pool_fixture(&["t", "t", "t", "t"]);
        // rebuild an unsmoothed matrix from an empty corpus
        let corpus = Corpus::from_records(
            vec![],
            (0..4).map(|i| researcher(&format!("r{i:02}"), &[], &["t"])).collect(),
        )
        .unwrap();
        let raw = build_matrix(&corpus);
        assert!(matches!(
            sample_team(&raw, &profiles, 4, 0.0, 1),
            Err(Error::MatrixNotSmoothed)
        ));
        drop(matrix);
    }

    #[test]
    fn no_duplicate_members_and_leader_not_scientist() {
        let (matrix, profiles) =
            pool_fixture(&["a", "b", "a", "b", "c", "a", "b", "c", "a", "b"]);
        for seed in 0..50 {
            let team = sample_team(&matrix, &profiles, 4, 0.5, seed).unwrap();
            let mut members: Vec<&str> = team.roster();
            members.sort_unstable();
            members.dedup();
            assert_eq!(members.len(), 4);
            assert!(!team.scientists.contains(&team.leader));
        }
    }

    #[test]
    fn diversity_post_pass_enforces_fraction() {
        let (matrix, profiles) =
            pool_fixture(&["a", "a", "a", "a", "a", "a", "b", "b", "b", "b"]);
        for seed in 0..30 {
            let team = sample_team(&matrix, &profiles, 4, 1.0, seed).unwrap();
            let leader_tag = profiles[&team.leader].primary_topic().unwrap();
            for scientist in &team.scientists {
                assert_ne!(profiles[scientist].primary_topic().unwrap(), leader_tag);
            }
        }
    }
}
