//! Weighted Borda aggregation of reviewer ballots, and round-robin reference
//! partitioning.
//!
//! A ballot ranks all n ideas with a strict permutation (1 = best) and
//! attaches an integer confidence in [1, 10] to every idea. The score of
//! idea k is Σ_j (n − r_jk) · c_jk / 10. Scores are accumulated in integer
//! tenths and divided once, so results are exact and independent of ballot
//! order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIDENCE_MIN: u32 = 1;
pub const CONFIDENCE_MAX: u32 = 10;

/// One reviewer's complete strict ranking plus per-idea confidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ballot {
    pub reviewer_id: String,
    /// idea id → rank in 1..=n, 1 = best; a strict permutation.
    pub ranking: BTreeMap<String, u32>,
    /// idea id → confidence in [1, 10].
    pub confidences: BTreeMap<String, u32>,
}

impl Ballot {
    pub fn new(
        reviewer_id: impl Into<String>,
        entries: impl IntoIterator<Item = (String, u32, u32)>,
    ) -> Self {
        let mut ranking = BTreeMap::new();
        let mut confidences = BTreeMap::new();
        for (idea, rank, confidence) in entries {
            ranking.insert(idea.clone(), rank);
            confidences.insert(idea, confidence);
        }
        Ballot {
            reviewer_id: reviewer_id.into(),
            ranking,
            confidences,
        }
    }

    /// Checks this ballot against an idea set: complete strict permutation
    /// ranking and in-range confidences for every idea.
    pub fn validate_against(&self, ideas: &BTreeSet<String>) -> Result<()> {
        let fail = |message: String| Error::InvalidBallot {
            reviewer: self.reviewer_id.clone(),
            message,
        };
        let ranked: BTreeSet<&String> = self.ranking.keys().collect();
        let expected: BTreeSet<&String> = ideas.iter().collect();
        if ranked != expected {
            return Err(fail("ranked idea set differs from the ballot set".into()));
        }
        let n = ideas.len() as u32;
        let mut seen = BTreeSet::new();
        for (idea, &rank) in &self.ranking {
            if rank < 1 || rank > n {
                return Err(fail(format!("rank {rank} for `{idea}` outside 1..={n}")));
            }
            if !seen.insert(rank) {
                return Err(fail(format!("rank {rank} assigned twice")));
            }
        }
        for idea in ideas {
            match self.confidences.get(idea) {
                Some(&c) if (CONFIDENCE_MIN..=CONFIDENCE_MAX).contains(&c) => {}
                Some(&c) => {
                    return Err(fail(format!(
                        "confidence {c} for `{idea}` outside [{CONFIDENCE_MIN}, {CONFIDENCE_MAX}]"
                    )))
                }
                None => return Err(fail(format!("missing confidence for `{idea}`"))),
            }
        }
        Ok(())
    }
}

/// Aggregated scores with the winning idea.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BordaResult {
    pub scores: BTreeMap<String, f64>,
    pub winner: String,
    pub ballot_count: usize,
}

/// Computes weighted Borda scores over `n` ideas.
///
/// Every ballot must rank the same `n` ideas. The winner is the maximal
/// score; ties break to the lexicographically smallest idea id.
pub fn borda_scores(ballots: &[Ballot], n: usize) -> Result<BordaResult> {
    let Some(first) = ballots.first() else {
        return Err(Error::NoUsableBallots);
    };
    let ideas: BTreeSet<String> = first.ranking.keys().cloned().collect();
    if ideas.len() != n {
        return Err(Error::InconsistentBallots(format!(
            "expected {n} ideas, first ballot ranks {}",
            ideas.len()
        )));
    }
    for ballot in ballots {
        let ranked: BTreeSet<String> = ballot.ranking.keys().cloned().collect();
        if ranked != ideas {
            return Err(Error::InconsistentBallots(format!(
                "ballot from `{}` ranks a different idea set",
                ballot.reviewer_id
            )));
        }
        ballot.validate_against(&ideas)?;
    }

    // Integer tenths keep the sum exact regardless of accumulation order.
    let mut tenths: BTreeMap<&String, u64> = ideas.iter().map(|id| (id, 0u64)).collect();
    for ballot in ballots {
        for (idea, &rank) in &ballot.ranking {
            let confidence = ballot.confidences[idea] as u64;
            let credit = (n as u64 - rank as u64) * confidence;
            *tenths.get_mut(idea).expect("idea present") += credit;
        }
    }
    let scores: BTreeMap<String, f64> = tenths
        .iter()
        .map(|(id, &t)| ((*id).clone(), t as f64 / 10.0))
        .collect();
    let winner = scores
        .iter()
        .fold(None::<(&String, f64)>, |best, (id, &score)| match best {
            Some((_, best_score)) if best_score >= score => best,
            _ => Some((id, score)),
        })
        .map(|(id, _)| id.clone())
        .expect("non-empty idea set");
    Ok(BordaResult {
        scores,
        winner,
        ballot_count: ballots.len(),
    })
}

/// Deals references to reviewers round-robin in the given (ascending
/// distance) order; share sizes differ by at most one.
pub fn partition_references(
    reference_ids: &[String],
    reviewers: &[String],
) -> Result<BTreeMap<String, Vec<String>>> {
    if reviewers.is_empty() {
        return Err(Error::NoReviewers);
    }
    let mut shares: BTreeMap<String, Vec<String>> = reviewers
        .iter()
        .map(|r| (r.clone(), Vec::new()))
        .collect();
    for (i, reference) in reference_ids.iter().enumerate() {
        let reviewer = &reviewers[i % reviewers.len()];
        shares
            .get_mut(reviewer)
            .expect("reviewer share exists")
            .push(reference.clone());
    }
    Ok(shares)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ballot(reviewer: &str, entries: &[(&str, u32, u32)]) -> Ballot {
        Ballot::new(
            reviewer,
            entries
                .iter()
                .map(|(id, r, c)| (id.to_string(), *r, *c)),
        )
    }

    #[test]
    fn single_ballot_full_confidence() {
        let result = borda_scores(
            &[ballot("rev", &[("i1", 1, 10), ("i2", 2, 10), ("i3", 3, 10)])],
            3,
        )
        .unwrap();
        assert_eq!(result.scores["i1"], 2.0);
        assert_eq!(result.scores["i2"], 1.0);
        assert_eq!(result.scores["i3"], 0.0);
        assert_eq!(result.winner, "i1");
        assert_eq!(result.ballot_count, 1);
    }

    /// Hand evaluation: i1 = 2 + 0.5 = 2.5, i2 = 1 + 1 = 2.0, i3 = 0.
    #[test]
    fn two_ballot_hand_example() {
        let result = borda_scores(
            &[
                ballot("a", &[("i1", 1, 10), ("i2", 2, 10), ("i3", 3, 10)]),
                ballot("b", &[("i2", 1, 5), ("i1", 2, 5), ("i3", 3, 5)]),
            ],
            3,
        )
        .unwrap();
        assert_eq!(result.scores["i1"], 2.5);
        assert_eq!(result.scores["i2"], 2.0);
        assert_eq!(result.scores["i3"], 0.0);
        assert_eq!(result.winner, "i1");
    }

    /// With a uniform confidence, the winner matches classical Borda.
    #[test]
    fn equal_confidence_reduces_to_classical_borda() {
        let ballots = vec![
            ballot("a", &[("x", 2, 7), ("y", 1, 7), ("z", 3, 7)]),
            ballot("b", &[("x", 1, 7), ("y", 3, 7), ("z", 2, 7)]),
            ballot("c", &[("x", 2, 7), ("y", 1, 7), ("z", 3, 7)]),
        ];
        let weighted = borda_scores(&ballots, 3).unwrap();

        // classical evaluator: points = n - rank, no weights
        let mut classical: BTreeMap<&str, u64> = BTreeMap::new();
        for b in &ballots {
            for (idea, &rank) in &b.ranking {
                *classical.entry(idea.as_str()).or_insert(0) += 3 - rank as u64;
            }
        }
        let classical_winner = classical
            .iter()
            .fold(None::<(&str, u64)>, |best, (id, &pts)| match best {
                Some((_, b)) if b >= pts => best,
                _ => Some((id, pts)),
            })
            .unwrap()
            .0;
        assert_eq!(weighted.winner, classical_winner);
    }

    #[test]
    fn winner_tie_breaks_lexicographically() {
        let result = borda_scores(
            &[ballot("a", &[("b-idea", 1, 10), ("a-idea", 2, 10)]),
              ballot("b", &[("a-idea", 1, 10), ("b-idea", 2, 10)])],
            2,
        )
        .unwrap();
        assert_eq!(result.scores["a-idea"], result.scores["b-idea"]);
        assert_eq!(result.winner, "a-idea");
    }

    #[test]
    fn malformed_ballots_rejected() {
        // rank out of range
        assert!(matches!(
            borda_scores(&[ballot("a", &[("i1", 0, 5), ("i2", 2, 5)])], 2),
            Err(Error::InvalidBallot { .. })
        ));
        // tied ranks
        assert!(matches!(
            borda_scores(&[ballot("a", &[("i1", 1, 5), ("i2", 1, 5)])], 2),
            Err(Error::InvalidBallot { .. })
        ));
        // confidence out of range
        assert!(matches!(
            borda_scores(&[ballot("a", &[("i1", 1, 11), ("i2", 2, 5)])], 2),
            Err(Error::InvalidBallot { .. })
        ));
        assert!(matches!(
            borda_scores(&[ballot("a", &[("i1", 1, 0), ("i2", 2, 5)])], 2),
            Err(Error::InvalidBallot { .. })
        ));
        // inconsistent idea sets
        assert!(matches!(
            borda_scores(
                &[
                    ballot("a", &[("i1", 1, 5), ("i2", 2, 5)]),
                    ballot("b", &[("i1", 1, 5), ("i3", 2, 5)]),
                ],
                2
            ),
            Err(Error::InconsistentBallots(_))
        ));
        // no ballots
        assert!(matches!(borda_scores(&[], 2), Err(Error::NoUsableBallots)));
    }

    #[test]
    fn ballot_order_does_not_matter() {
        let a = ballot("a", &[("i1", 1, 3), ("i2", 2, 9), ("i3", 3, 6)]);
        let b = ballot("b", &[("i3", 1, 8), ("i1", 2, 2), ("i2", 3, 4)]);
        let c = ballot("c", &[("i2", 1, 10), ("i3", 2, 1), ("i1", 3, 7)]);
        let forward = borda_scores(&[a.clone(), b.clone(), c.clone()], 3).unwrap();
        let backward = borda_scores(&[c, b, a], 3).unwrap();
        assert_eq!(forward.scores, backward.scores);
        assert_eq!(forward.winner, backward.winner);
    }

    #[test]
    fn scaling_confidences_scales_scores() {
        let base = borda_scores(
            &[ballot("a", &[("i1", 1, 2), ("i2", 2, 2), ("i3", 3, 2)])],
            3,
        )
        .unwrap();
        let scaled = borda_scores(
            &[ballot("a", &[("i1", 1, 10), ("i2", 2, 10), ("i3", 3, 10)])],
            3,
        )
        .unwrap();
        for (idea, &score) in &base.scores {
            assert_eq!(scaled.scores[idea], score * 5.0);
        }
        assert_eq!(base.winner, scaled.winner);
    }

    #[test]
    fn score_bounds_hold() {
        let result = borda_scores(
            &[
                ballot("a", &[("i1", 1, 10), ("i2", 2, 10), ("i3", 3, 10)]),
                ballot("b", &[("i1", 1, 10), ("i2", 2, 10), ("i3", 3, 10)]),
            ],
            3,
        )
        .unwrap();
        for &score in result.scores.values() {
            assert!(score >= 0.0);
            assert!(score <= 2.0 * (3.0 - 1.0));
        }
    }

    #[test]
    fn partition_examples() {
        let refs: Vec<String> = (0..8).map(|i| format!("p{i}")).collect();
        let reviewers: Vec<String> = (0..4).map(|i| format!("r{i}")).collect();
        let shares = partition_references(&refs, &reviewers).unwrap();
        for reviewer in &reviewers {
            assert_eq!(shares[reviewer].len(), 2);
        }

        let refs5: Vec<String> = (0..5).map(|i| format!("p{i}")).collect();
        let reviewers3: Vec<String> = (0..3).map(|i| format!("r{i}")).collect();
        let shares = partition_references(&refs5, &reviewers3).unwrap();
        let mut sizes: Vec<usize> = shares.values().map(|v| v.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2, 2]);

        let shares = partition_references(&[], &reviewers3).unwrap();
        assert!(shares.values().all(|v| v.is_empty()));

        assert!(matches!(
            partition_references(&refs, &[]),
            Err(Error::NoReviewers)
        ));
    }

    #[test]
    fn partition_is_disjoint_and_exhaustive() {
        let refs: Vec<String> = (0..13).map(|i| format!("p{i:02}")).collect();
        let reviewers: Vec<String> = (0..4).map(|i| format!("r{i}")).collect();
        let shares = partition_references(&refs, &reviewers).unwrap();
        let mut all: Vec<&String> = shares.values().flatten().collect();
        all.sort_unstable();
        assert_eq!(all.len(), refs.len());
        all.dedup();
        assert_eq!(all.len(), refs.len());
    }
}
