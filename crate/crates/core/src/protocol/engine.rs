//! Four-stage workflow engine.
//!
//! Topic discussion → idea generation (generate, cross-revise, synthesize,
//! reflect) → novelty check (retrieval, reference partitioning, weighted
//! Borda vote) → sequential abstract refinement. The transcript owns event
//! ordering single-threaded; only the cross-revision calls fan out, and their
//! results are joined in (idea, reviser) order, so a fixed seed and scripted
//! backend give byte-identical transcripts at any thread count.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::prompts::{render, PromptBundle};
use super::transcript::{
    Checkpoint, CompletedStage, EventKind, IdeaRecord, Stage, Transcript,
};
use crate::corpus::{Corpus, CorpusSplit, CorpusStats};
use crate::embed::{self, EmbeddingIndex};
use crate::error::{Error, Result};
use crate::gateway::{envelope, ChatRequest, Gateway};
use crate::metrics::{self, MetricReport};
use crate::team::{self, CollaborationMatrix, KnowledgeProfile, Team};
use crate::voting::{self, Ballot, BordaResult, CONFIDENCE_MAX, CONFIDENCE_MIN};
use crate::{par, rng};

const SYSTEM_PROMPT: &str =
    "You are a research scientist agent collaborating on novel, feasible, impactful research ideas.";
const MAX_TOKENS: u32 = 2048;
const REPROMPT_SCORES: &str =
    "REMINDER: reply with one line per candidate, formatted `index: score`, integer scores 1-10, covering every candidate exactly once.";
const REPROMPT_BALLOT: &str =
    "REMINDER: reply with one line per idea, formatted `idea_id:rank:confidence`; ranks must form a strict permutation starting at 1 and confidences must be integers in 1-10.";
const REPROMPT_JUDGE: &str = "REMINDER: reply with exactly one idea_id from the candidate list.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewerPool {
    Internal,
    External,
}

/// Workflow knobs for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub team_size: usize,
    pub rounds: u32,
    pub top_k: usize,
    pub trials: u32,
    pub enable_discussion: bool,
    pub enable_vote: bool,
    pub reviewer_pool: ReviewerPool,
    pub seed: u64,
    pub diversity_fraction: f64,
    /// Recent publication titles quoted in each agent's profile summary.
    pub profile_titles: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            team_size: 4,
            rounds: 5,
            top_k: 8,
            trials: 20,
            enable_discussion: true,
            enable_vote: true,
            reviewer_pool: ReviewerPool::Internal,
            seed: 0,
            diversity_fraction: 0.0,
            profile_titles: 10,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.team_size < 3 {
            return Err(Error::Config(format!(
                "team size must be at least 3, got {}",
                self.team_size
            )));
        }
        if self.rounds < 1 {
            return Err(Error::Config("rounds must be at least 1".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.diversity_fraction) {
            return Err(Error::Config(format!(
                "diversity fraction must lie in [0, 1], got {}",
                self.diversity_fraction
            )));
        }
        Ok(())
    }

    /// Digest over the canonical config serialization; recorded in every
    /// transcript and checked on resume.
    pub fn digest(&self) -> String {
        let line = crate::jsonl::canonical_line(self).expect("config serializes");
        let digest: [u8; 32] = Sha256::digest(line.as_bytes()).into();
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A finished trial: full transcript plus the metric report for its abstract.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub transcript: Transcript,
    pub metrics: MetricReport,
}

/// Outcome of driving one trial: either it completed, or a stage failed and
/// left a resumable checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Completed(Box<TrialRun>),
    Aborted {
        stage: &'static str,
        error: String,
        checkpoint: Box<Checkpoint>,
    },
}

/// Appends retrieved paper blocks (title + abstract, ascending distance) to a
/// base prompt. With `k = 0` the prompt is returned unchanged and nothing is
/// embedded.
pub fn augment_prompt(
    base_prompt: &str,
    idea_text: &str,
    corpus: &Corpus,
    index: &EmbeddingIndex,
    k: usize,
    gateway: &Gateway,
) -> Result<String> {
    if k == 0 {
        return Ok(base_prompt.to_string());
    }
    let query = gateway.embed(idea_text)?;
    let hits = embed::top_k(index, &query, k, None)?;
    let mut out = String::with_capacity(base_prompt.len() + 256 * hits.len());
    out.push_str(base_prompt);
    for (id, _) in hits {
        let publication = corpus
            .publication(&id)
            .ok_or_else(|| Error::DanglingReference {
                referrer_kind: "index",
                referrer: "embedding".into(),
                target_kind: "publication",
                target: id.clone(),
            })?;
        out.push_str("\nREFERENCE: ");
        out.push_str(&publication.title);
        out.push('\n');
        out.push_str(&publication.abstract_text);
        out.push('\n');
    }
    Ok(out)
}

/// Drives trials against one corpus/index/gateway configuration.
pub struct Engine<'a> {
    corpus: &'a Corpus,
    split: &'a CorpusSplit,
    index: &'a EmbeddingIndex,
    stats: &'a CorpusStats,
    gateway: &'a Gateway,
    prompts: PromptBundle,
    matrix: CollaborationMatrix,
    profiles: BTreeMap<String, KnowledgeProfile>,
}

impl<'a> Engine<'a> {
    /// Validates prompts and index coverage, builds the smoothed
    /// collaboration matrix and the knowledge profiles of every researcher
    /// with at least one embedded publication (the sampling pool).
    pub fn new(
        corpus: &'a Corpus,
        split: &'a CorpusSplit,
        index: &'a EmbeddingIndex,
        stats: &'a CorpusStats,
        gateway: &'a Gateway,
        prompts: PromptBundle,
    ) -> Result<Self> {
        prompts.validate()?;
        for id in index.ids() {
            if corpus.publication(id).is_none() {
                return Err(Error::DanglingReference {
                    referrer_kind: "index",
                    referrer: "embedding".into(),
                    target_kind: "publication",
                    target: id.clone(),
                });
            }
        }
        let matrix = team::smooth(&team::build_matrix(corpus));
        let mut profiles = BTreeMap::new();
        for id in corpus.researchers().keys() {
            match team::knowledge_profile(corpus, index, id) {
                Ok(profile) => {
                    profiles.insert(id.clone(), profile);
                }
                Err(Error::NoEmbeddedPublications { .. }) => {}
                Err(other) => return Err(other),
            }
        }
        Ok(Engine {
            corpus,
            split,
            index,
            stats,
            gateway,
            prompts,
            matrix,
            profiles,
        })
    }

    pub fn profiles(&self) -> &BTreeMap<String, KnowledgeProfile> {
        &self.profiles
    }

    pub fn matrix(&self) -> &CollaborationMatrix {
        &self.matrix
    }

    /// Samples the trial team from the engine pool.
    pub fn sample_team(&self, config: &RunConfig) -> Result<Team> {
        team::sample_team(
            &self.matrix,
            &self.profiles,
            config.team_size,
            config.diversity_fraction,
            config.seed,
        )
    }

    fn chat(&self, content: String, config: &RunConfig) -> Result<String> {
        let request = ChatRequest::single_turn(
            SYSTEM_PROMPT,
            content,
            self.gateway.default_temperature(),
            MAX_TOKENS,
            Some(config.seed),
        );
        self.gateway.chat(&request)
    }

    fn profile_summary(&self, agent: &str, config: &RunConfig) -> String {
        let Some(researcher) = self.corpus.researcher(agent) else {
            return format!("{agent} (external reviewer)");
        };
        let mut recent: Vec<&String> = researcher.publication_ids.iter().collect();
        recent.sort_by(|a, b| {
            let year = |id: &str| self.corpus.publication(id).map(|p| p.year).unwrap_or(0);
            year(b).cmp(&year(a)).then_with(|| a.cmp(b))
        });
        let titles: Vec<&str> = recent
            .iter()
            .take(config.profile_titles)
            .filter_map(|id| self.corpus.publication(id).map(|p| p.title.as_str()))
            .collect();
        format!(
            "{} ({}). Affiliations: {}. Topics: {}. {} publications. Recent titles: {}.",
            researcher.name,
            researcher.id,
            join_or(&researcher.affiliations, "none"),
            join_or(&researcher.topics, "none"),
            researcher.publication_ids.len(),
            if titles.is_empty() { "none".to_string() } else { titles.join(" | ") },
        )
    }

    /// Stage 1: every agent proposes a topic in turn order, every agent
    /// scores all proposals, and the final topic is sampled with probability
    /// proportional to mean score.
    pub fn run_topic_discussion(
        &self,
        team: &Team,
        config: &RunConfig,
        transcript: &mut Transcript,
    ) -> Result<String> {
        let roster = team.roster();
        let mut proposals: Vec<String> = Vec::with_capacity(roster.len());
        let mut dialogue_lines: Vec<String> = Vec::new();
        for agent in &roster {
            let dialogue = if dialogue_lines.is_empty() {
                "(no proposals yet)".to_string()
            } else {
                dialogue_lines.join("\n")
            };
            let message = render(
                &self.prompts.topic_prompt,
                &[
                    ("agent", agent),
                    ("profile", &self.profile_summary(agent, config)),
                    ("dialogue", &dialogue),
                ],
            );
            let topic = self.chat(message, config)?;
            transcript.record(
                Stage::TopicDiscussion,
                0,
                EventKind::TopicProposal,
                *agent,
                "team",
                topic.clone(),
            );
            dialogue_lines.push(format!("{agent}: {topic}"));
            proposals.push(topic);
        }

        let candidates = proposals
            .iter()
            .enumerate()
            .map(|(i, topic)| envelope::candidate_line(&i.to_string(), topic))
            .collect::<Vec<_>>()
            .join("\n");
        let mut score_sums = vec![0.0f64; proposals.len()];
        for agent in &roster {
            let message = render(
                &self.prompts.score_prompt,
                &[("agent", agent), ("candidates", candidates.as_str())],
            );
            let response = self.chat(message.clone(), config)?;
            let scores = match parse_scores(&response, proposals.len()) {
                Ok(scores) => scores,
                Err(first_err) => {
                    transcript.record(
                        Stage::TopicDiscussion,
                        0,
                        EventKind::Reprompt,
                        *agent,
                        "system",
                        response,
                    );
                    let retry = format!("{message}\n{REPROMPT_SCORES}");
                    let response = self.chat(retry, config)?;
                    match parse_scores(&response, proposals.len()) {
                        Ok(scores) => scores,
                        Err(_) => {
                            transcript.record(
                                Stage::TopicDiscussion,
                                0,
                                EventKind::ParseFallback,
                                "system",
                                *agent,
                                format!("topic scores defaulted to 5: {first_err}"),
                            );
                            vec![5u32; proposals.len()]
                        }
                    }
                }
            };
            transcript.record(
                Stage::TopicDiscussion,
                0,
                EventKind::TopicScores,
                *agent,
                "team",
                scores
                    .iter()
                    .enumerate()
                    .map(|(i, s)| format!("{i}:{s}"))
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            for (sum, score) in score_sums.iter_mut().zip(&scores) {
                *sum += f64::from(*score);
            }
        }

        let means: Vec<f64> = score_sums
            .iter()
            .map(|s| s / roster.len() as f64)
            .collect();
        let total: f64 = means.iter().sum();
        let mut stream = rng::stream(config.seed, "topic-select");
        let mut x = stream.gen::<f64>() * total;
        let mut chosen = means.len() - 1;
        for (i, mean) in means.iter().enumerate() {
            if x < *mean {
                chosen = i;
                break;
            }
            x -= mean;
        }
        let topic = proposals[chosen].clone();
        transcript.record(
            Stage::TopicDiscussion,
            0,
            EventKind::TopicSelected,
            "system",
            "team",
            topic.clone(),
        );
        Ok(topic)
    }

    /// Stage 2: per round, each scientist generates an idea (retrieval-
    /// augmented), the other scientists revise it in parallel, the leader
    /// synthesizes the revisions, and the originator reflects. Finals carry
    /// forward as the next round's seeds; the last round's records are
    /// returned with embeddings.
    pub fn run_idea_generation(
        &self,
        team: &Team,
        topic: &str,
        config: &RunConfig,
        transcript: &mut Transcript,
    ) -> Result<Vec<IdeaRecord>> {
        struct RoundIdea {
            originator: String,
            initial: String,
            revisions: BTreeMap<String, String>,
            synthesis: Option<String>,
            final_text: String,
        }

        let scientists = &team.scientists;
        let mut finals: Vec<String> = Vec::new();
        let mut last_round: Vec<RoundIdea> = Vec::new();

        for round in 1..=config.rounds {
            let mut initials: Vec<String> = Vec::with_capacity(scientists.len());
            for (i, agent) in scientists.iter().enumerate() {
                let prior = if round == 1 {
                    "(first round: start from the team topic)".to_string()
                } else {
                    finals[i].clone()
                };
                let query = if round == 1 { topic } else { &finals[i] };
                let base = render(
                    &self.prompts.generation_prompt,
                    &[
                        ("agent", agent.as_str()),
                        ("profile", &self.profile_summary(agent, config)),
                        ("topic", topic),
                        ("prior", &prior),
                    ],
                );
                let prompt = augment_prompt(
                    &base,
                    query,
                    self.corpus,
                    self.index,
                    config.top_k,
                    self.gateway,
                )?;
                let idea = self.chat(prompt, config)?;
                transcript.record(
                    Stage::IdeaGeneration,
                    round,
                    EventKind::Idea,
                    agent.as_str(),
                    "scientists",
                    idea.clone(),
                );
                initials.push(idea);
            }

            if !config.enable_discussion {
                finals = initials.clone();
                last_round = scientists
                    .iter()
                    .zip(&initials)
                    .map(|(agent, idea)| RoundIdea {
                        originator: agent.clone(),
                        initial: idea.clone(),
                        revisions: BTreeMap::new(),
                        synthesis: None,
                        final_text: idea.clone(),
                    })
                    .collect();
                continue;
            }

            // Cross-revision fan-out; joined in (idea, reviser) order.
            let tasks: Vec<(usize, usize)> = (0..scientists.len())
                .flat_map(|i| {
                    (0..scientists.len())
                        .filter(move |&j| j != i)
                        .map(move |j| (i, j))
                })
                .collect();
            let revised: Vec<String> = par::try_map_indexed(tasks.len(), |t| {
                let (i, j) = tasks[t];
                let message = render(
                    &self.prompts.revision_prompt,
                    &[
                        ("agent", scientists[j].as_str()),
                        ("profile", &self.profile_summary(&scientists[j], config)),
                        ("idea", &initials[i]),
                    ],
                );
                self.chat(message, config)
            })?;
            let mut revision_maps: Vec<BTreeMap<String, String>> =
                vec![BTreeMap::new(); scientists.len()];
            for (&(i, j), text) in tasks.iter().zip(&revised) {
                transcript.record(
                    Stage::IdeaGeneration,
                    round,
                    EventKind::Revision,
                    scientists[j].as_str(),
                    scientists[i].as_str(),
                    text.clone(),
                );
                revision_maps[i].insert(scientists[j].clone(), text.clone());
            }

            let mut syntheses: Vec<String> = Vec::with_capacity(scientists.len());
            for (i, agent) in scientists.iter().enumerate() {
                let revisions = revision_maps[i]
                    .iter()
                    .map(|(reviser, text)| format!("REVISION by {reviser}:\n{text}"))
                    .collect::<Vec<_>>()
                    .join("\n\n");
                let message = render(
                    &self.prompts.synthesis_prompt,
                    &[
                        ("agent", team.leader.as_str()),
                        ("profile", &self.profile_summary(&team.leader, config)),
                        ("revisions", &revisions),
                    ],
                );
                let synthesis = self.chat(message, config)?;
                transcript.record(
                    Stage::IdeaGeneration,
                    round,
                    EventKind::Synthesis,
                    team.leader.as_str(),
                    agent.as_str(),
                    synthesis.clone(),
                );
                syntheses.push(synthesis);
            }

            let mut reflected: Vec<String> = Vec::with_capacity(scientists.len());
            for (i, agent) in scientists.iter().enumerate() {
                let message = render(
                    &self.prompts.reflection_prompt,
                    &[
                        ("agent", agent.as_str()),
                        ("idea", &initials[i]),
                        ("synthesis", &syntheses[i]),
                    ],
                );
                let final_text = self.chat(message, config)?;
                transcript.record(
                    Stage::IdeaGeneration,
                    round,
                    EventKind::Reflection,
                    agent.as_str(),
                    "team",
                    final_text.clone(),
                );
                reflected.push(final_text);
            }

            finals = reflected.clone();
            last_round = (0..scientists.len())
                .map(|i| RoundIdea {
                    originator: scientists[i].clone(),
                    initial: initials[i].clone(),
                    revisions: revision_maps[i].clone(),
                    synthesis: Some(syntheses[i].clone()),
                    final_text: reflected[i].clone(),
                })
                .collect();
        }

        let mut records = Vec::with_capacity(last_round.len());
        for idea in last_round {
            let embedding = self.gateway.embed(&idea.final_text)?;
            if embedding.dim() != self.index.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.index.dim(),
                    actual: embedding.dim(),
                });
            }
            records.push(IdeaRecord {
                originator: idea.originator,
                initial: idea.initial,
                revisions: idea.revisions,
                synthesis: idea.synthesis,
                final_text: idea.final_text,
                embedding,
            });
        }
        Ok(records)
    }

    /// Stage 3: pool per-idea retrievals, deal them round-robin to the
    /// reviewers, collect strict ranked ballots, and aggregate with weighted
    /// Borda scoring. Returns the (optional) Borda result and the winning
    /// idea's position.
    pub fn run_check_novelty(
        &self,
        team: &Team,
        ideas: &[IdeaRecord],
        config: &RunConfig,
        transcript: &mut Transcript,
    ) -> Result<(Option<BordaResult>, usize)> {
        if ideas.is_empty() {
            return Err(Error::Config("check novelty needs at least one idea".into()));
        }
        let idea_ids: Vec<String> = ideas.iter().map(|i| i.originator.clone()).collect();
        let candidates = ideas
            .iter()
            .map(|idea| envelope::candidate_line(&idea.originator, digest_line(&idea.final_text)))
            .collect::<Vec<_>>()
            .join("\n");

        if !config.enable_vote {
            let winner_index = if ideas.len() == 1 {
                0
            } else {
                let message = render(
                    &self.prompts.judge_prompt,
                    &[("agent", team.leader.as_str()), ("candidates", candidates.as_str())],
                );
                let response = self.chat(message.clone(), config)?;
                let chosen = match parse_judgment(&response, &idea_ids) {
                    Some(id) => id,
                    None => {
                        transcript.record(
                            Stage::CheckNovelty,
                            0,
                            EventKind::Reprompt,
                            team.leader.as_str(),
                            "system",
                            response,
                        );
                        let retry = format!("{message}\n{REPROMPT_JUDGE}");
                        let response = self.chat(retry, config)?;
                        match parse_judgment(&response, &idea_ids) {
                            Some(id) => id,
                            None => {
                                let fallback = idea_ids
                                    .iter()
                                    .min()
                                    .expect("non-empty ideas")
                                    .clone();
                                transcript.record(
                                    Stage::CheckNovelty,
                                    0,
                                    EventKind::ParseFallback,
                                    "system",
                                    team.leader.as_str(),
                                    format!("judgment defaulted to `{fallback}`"),
                                );
                                fallback
                            }
                        }
                    }
                };
                transcript.record(
                    Stage::CheckNovelty,
                    0,
                    EventKind::LeaderJudgment,
                    team.leader.as_str(),
                    "team",
                    chosen.clone(),
                );
                idea_ids
                    .iter()
                    .position(|id| *id == chosen)
                    .expect("parsed judgment is a known idea id")
            };
            transcript.record(
                Stage::CheckNovelty,
                0,
                EventKind::WinnerSelected,
                "system",
                "team",
                idea_ids[winner_index].clone(),
            );
            return Ok((None, winner_index));
        }

        if ideas.len() < 2 {
            return Err(Error::Config(
                "voting requires at least two ideas".into(),
            ));
        }

        // Union of per-idea retrievals, deduplicated by id, ordered by the
        // minimum distance any idea achieved.
        let mut pool: BTreeMap<String, f64> = BTreeMap::new();
        for idea in ideas {
            for (id, distance) in
                embed::top_k(self.index, &idea.embedding, config.top_k, None)?
            {
                pool.entry(id)
                    .and_modify(|d| *d = d.min(distance))
                    .or_insert(distance);
            }
        }
        let mut pooled: Vec<(f64, String)> =
            pool.into_iter().map(|(id, d)| (d, id)).collect();
        pooled.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let pooled_ids: Vec<String> = pooled.into_iter().map(|(_, id)| id).collect();

        let reviewers: Vec<String> = match config.reviewer_pool {
            ReviewerPool::Internal => team.roster().iter().map(|s| s.to_string()).collect(),
            ReviewerPool::External => {
                let mut external = self.profiles.clone();
                for member in team.roster() {
                    external.remove(member);
                }
                let review_team = team::sample_team(
                    &self.matrix,
                    &external,
                    config.team_size,
                    config.diversity_fraction,
                    config.seed,
                )?;
                review_team.roster().iter().map(|s| s.to_string()).collect()
            }
        };

        let shares = voting::partition_references(&pooled_ids, &reviewers)?;
        for reviewer in &reviewers {
            transcript.record(
                Stage::CheckNovelty,
                0,
                EventKind::ReferenceShare,
                "system",
                reviewer.as_str(),
                shares[reviewer].join(","),
            );
        }

        let mut ballots: Vec<Ballot> = Vec::with_capacity(reviewers.len());
        for reviewer in &reviewers {
            let references = if shares[reviewer].is_empty() {
                "(no references assigned)".to_string()
            } else {
                shares[reviewer]
                    .iter()
                    .map(|id| {
                        let publication =
                            self.corpus.publication(id).expect("pool ids resolve");
                        format!("REFERENCE: {}\n{}", publication.title, publication.abstract_text)
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            };
            let message = render(
                &self.prompts.review_prompt,
                &[
                    ("agent", reviewer.as_str()),
                    ("candidates", candidates.as_str()),
                    ("references", references.as_str()),
                ],
            );
            let response = self.chat(message.clone(), config)?;
            let ballot = match parse_ballot(&response, reviewer, &idea_ids) {
                Ok(ballot) => Some(ballot),
                Err(first_err) => {
                    transcript.record(
                        Stage::CheckNovelty,
                        0,
                        EventKind::Reprompt,
                        reviewer.as_str(),
                        "system",
                        response,
                    );
                    let retry = format!("{message}\n{REPROMPT_BALLOT}");
                    let response = self.chat(retry, config)?;
                    match parse_ballot(&response, reviewer, &idea_ids) {
                        Ok(ballot) => Some(ballot),
                        Err(_) => {
                            transcript.record(
                                Stage::CheckNovelty,
                                0,
                                EventKind::BallotDropped,
                                reviewer.as_str(),
                                "leader",
                                format!("ballot dropped: {first_err}"),
                            );
                            None
                        }
                    }
                }
            };
            if let Some(ballot) = ballot {
                transcript.record(
                    Stage::CheckNovelty,
                    0,
                    EventKind::Ballot,
                    reviewer.as_str(),
                    "leader",
                    ballot_payload(&ballot),
                );
                ballots.push(ballot);
            }
        }
        if ballots.is_empty() {
            return Err(Error::NoUsableBallots);
        }

        let result = voting::borda_scores(&ballots, idea_ids.len())?;
        let winner_index = idea_ids
            .iter()
            .position(|id| *id == result.winner)
            .expect("winner is a known idea id");
        transcript.record(
            Stage::CheckNovelty,
            0,
            EventKind::WinnerSelected,
            "system",
            "team",
            result.winner.clone(),
        );
        transcript.ballots = ballots;
        Ok((Some(result), winner_index))
    }

    /// Stage 4: the winning idea's originator drafts; every other roster
    /// member applies exactly one refinement pass in roster order.
    pub fn run_abstract_generation(
        &self,
        team: &Team,
        winner: &IdeaRecord,
        config: &RunConfig,
        transcript: &mut Transcript,
    ) -> Result<String> {
        let message = render(
            &self.prompts.draft_prompt,
            &[
                ("agent", winner.originator.as_str()),
                ("idea", winner.final_text.as_str()),
            ],
        );
        let mut current = self.chat(message, config)?;
        transcript.record(
            Stage::AbstractGeneration,
            0,
            EventKind::Draft,
            winner.originator.as_str(),
            "team",
            current.clone(),
        );
        for agent in team.roster() {
            if agent == winner.originator {
                continue;
            }
            let message = render(
                &self.prompts.refinement_prompt,
                &[
                    ("agent", agent),
                    ("draft", current.as_str()),
                    ("idea", winner.final_text.as_str()),
                ],
            );
            current = self.chat(message, config)?;
            transcript.record(
                Stage::AbstractGeneration,
                0,
                EventKind::Refinement,
                agent,
                "team",
                current.clone(),
            );
        }
        Ok(current)
    }

    /// Runs all four stages plus scoring from scratch.
    pub fn run_trial(&self, config: &RunConfig) -> Result<TrialOutcome> {
        self.drive(config, None)
    }

    /// Continues an aborted trial from its checkpoint.
    pub fn resume_trial(&self, config: &RunConfig, checkpoint: Checkpoint) -> Result<TrialOutcome> {
        self.drive(config, Some(checkpoint))
    }

    fn drive(&self, config: &RunConfig, checkpoint: Option<Checkpoint>) -> Result<TrialOutcome> {
        config.validate()?;
        let digest = config.digest();
        let mut transcript = Transcript::default();
        let mut completed = CompletedStage::None;
        let mut topic: Option<String> = None;
        let mut ideas: Vec<IdeaRecord> = Vec::new();
        let mut borda: Option<BordaResult> = None;
        let mut winner_index: Option<usize> = None;
        let mut final_abstract: Option<String> = None;

        if let Some(checkpoint) = checkpoint {
            if checkpoint.config_digest != digest {
                return Err(Error::Config(format!(
                    "checkpoint digest {} does not match config digest {digest}",
                    checkpoint.config_digest
                )));
            }
            if checkpoint.seed != config.seed {
                return Err(Error::Config(format!(
                    "checkpoint seed {} does not match config seed {}",
                    checkpoint.seed, config.seed
                )));
            }
            transcript.events = checkpoint.events;
            transcript.ballots = checkpoint.ballots;
            completed = checkpoint.completed;
            topic = checkpoint.topic;
            ideas = checkpoint.ideas;
            borda = checkpoint.borda;
            winner_index = checkpoint.winner_index;
            final_abstract = checkpoint.final_abstract;
        }

        let team = self.sample_team(config)?;

        // On a stage failure, events of the unfinished stage are rolled back
        // so a resumed trial replays the stage without duplicating them.
        macro_rules! guard {
            ($stage:expr, $mark:expr, $result:expr) => {
                match $result {
                    Ok(value) => value,
                    Err(error) => {
                        transcript.events.truncate($mark);
                        return Ok(TrialOutcome::Aborted {
                            stage: $stage,
                            error: error.to_string(),
                            checkpoint: Box::new(Checkpoint {
                                config_digest: digest,
                                seed: config.seed,
                                completed,
                                topic,
                                ideas,
                                winner_index,
                                borda,
                                ballots: transcript.ballots.clone(),
                                final_abstract,
                                events: transcript.events.clone(),
                            }),
                        })
                    }
                }
            };
        }

        if completed < CompletedStage::Topic {
            let mark = transcript.events.len();
            let value = guard!(
                "topic_discussion",
                mark,
                self.run_topic_discussion(&team, config, &mut transcript)
            );
            topic = Some(value);
            completed = CompletedStage::Topic;
        }
        transcript.final_topic = topic.clone();

        if completed < CompletedStage::Ideas {
            let mark = transcript.events.len();
            let value = guard!(
                "idea_generation",
                mark,
                self.run_idea_generation(
                    &team,
                    topic.as_deref().expect("topic completed"),
                    config,
                    &mut transcript,
                )
            );
            ideas = value;
            completed = CompletedStage::Ideas;
        }
        transcript.idea_records = ideas.clone();

        if completed < CompletedStage::Winner {
            let mark = transcript.events.len();
            let (result, index) = guard!(
                "check_novelty",
                mark,
                self.run_check_novelty(&team, &ideas, config, &mut transcript)
            );
            borda = result;
            winner_index = Some(index);
            completed = CompletedStage::Winner;
        }

        if completed < CompletedStage::Abstract {
            let mark = transcript.events.len();
            let winner = &ideas[winner_index.expect("winner completed")];
            let value = guard!(
                "abstract_generation",
                mark,
                self.run_abstract_generation(&team, winner, config, &mut transcript)
            );
            final_abstract = Some(value);
            completed = CompletedStage::Abstract;
        }
        transcript.final_abstract = final_abstract.clone();

        let abstract_text = final_abstract.as_deref().expect("abstract completed");
        let mark = transcript.events.len();
        let embedding = guard!("scoring", mark, self.gateway.embed(abstract_text));
        let metrics = metrics::evaluate(&embedding, self.corpus, self.split, self.index, self.stats)?;

        Ok(TrialOutcome::Completed(Box::new(TrialRun {
            transcript,
            metrics,
        })))
    }
}

fn join_or(items: &[String], fallback: &str) -> String {
    if items.is_empty() {
        fallback.to_string()
    } else {
        items.join("; ")
    }
}

fn digest_line(text: &str) -> &str {
    text.lines().next().unwrap_or("")
}

fn ballot_payload(ballot: &Ballot) -> String {
    ballot
        .ranking
        .iter()
        .map(|(idea, rank)| format!("{idea}:{rank}:{}", ballot.confidences[idea]))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses `index: score` lines into a complete score vector.
fn parse_scores(response: &str, candidates: usize) -> Result<Vec<u32>, String> {
    let mut scores: Vec<Option<u32>> = vec![None; candidates];
    for line in response.lines() {
        let line = line.trim();
        let Some((index, score)) = line.split_once(':') else {
            continue;
        };
        let Ok(index) = index.trim().parse::<usize>() else {
            continue;
        };
        let Ok(score) = score.trim().parse::<u32>() else {
            continue;
        };
        if index >= candidates {
            return Err(format!("score for unknown candidate {index}"));
        }
        if !(CONFIDENCE_MIN..=CONFIDENCE_MAX).contains(&score) {
            return Err(format!("score {score} outside 1-10"));
        }
        if scores[index].replace(score).is_some() {
            return Err(format!("candidate {index} scored twice"));
        }
    }
    scores
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| format!("candidate {i} not scored")))
        .collect()
}

/// Parses `idea_id:rank:confidence` lines into a validated ballot.
fn parse_ballot(
    response: &str,
    reviewer: &str,
    idea_ids: &[String],
) -> Result<Ballot, String> {
    let known: BTreeSet<&str> = idea_ids.iter().map(|s| s.as_str()).collect();
    let mut entries: Vec<(String, u32, u32)> = Vec::new();
    for line in response.lines() {
        let line = line.trim();
        let parts: Vec<&str> = line.split(':').map(|p| p.trim()).collect();
        if parts.len() != 3 {
            continue;
        }
        let (id, rank, confidence) = (parts[0], parts[1], parts[2]);
        if !known.contains(id) {
            continue;
        }
        let Ok(rank) = rank.parse::<u32>() else {
            return Err(format!("unparsable rank `{rank}` for `{id}`"));
        };
        let Ok(confidence) = confidence.parse::<u32>() else {
            return Err(format!("unparsable confidence `{confidence}` for `{id}`"));
        };
        if entries.iter().any(|(seen, _, _)| seen == id) {
            return Err(format!("idea `{id}` ranked twice"));
        }
        entries.push((id.to_string(), rank, confidence));
    }
    if entries.len() != idea_ids.len() {
        return Err(format!(
            "ballot covers {} of {} ideas",
            entries.len(),
            idea_ids.len()
        ));
    }
    let ballot = Ballot::new(reviewer, entries);
    let ideas: BTreeSet<String> = idea_ids.iter().cloned().collect();
    ballot
        .validate_against(&ideas)
        .map_err(|e| e.to_string())?;
    Ok(ballot)
}

/// Finds the earliest idea id mentioned in a judge response.
fn parse_judgment(response: &str, idea_ids: &[String]) -> Option<String> {
    idea_ids
        .iter()
        .filter_map(|id| response.find(id.as_str()).map(|pos| (pos, id)))
        .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)))
        .map(|(_, id)| id.clone())
}
