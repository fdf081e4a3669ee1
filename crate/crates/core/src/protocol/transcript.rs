//! Transcript and checkpoint records.
//!
//! Events are totally ordered by a logical sequence number (wall-clock time
//! would break the byte-identical determinism contract, so there is none
//! anywhere in a persisted artifact). A checkpoint captures the outputs of
//! every completed stage so an aborted trial can resume at the next stage
//! boundary.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::embed::EmbeddingVector;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::voting::{Ballot, BordaResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    TopicDiscussion,
    IdeaGeneration,
    CheckNovelty,
    AbstractGeneration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TopicProposal,
    TopicScores,
    TopicSelected,
    Idea,
    Revision,
    Synthesis,
    Reflection,
    ReferenceShare,
    Ballot,
    BallotDropped,
    LeaderJudgment,
    WinnerSelected,
    Draft,
    Refinement,
    /// Carries a discarded unparsable response; the call that produced it
    /// still appears in the transcript exactly once.
    Reprompt,
    ParseFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub stage: Stage,
    pub round: u32,
    pub kind: EventKind,
    pub sender: String,
    pub receiver: String,
    pub payload: String,
}

/// Full lineage of one idea through the knowledge-exchange cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdeaRecord {
    pub originator: String,
    pub initial: String,
    /// reviser id → revised text; empty when discussion is disabled.
    pub revisions: BTreeMap<String, String>,
    pub synthesis: Option<String>,
    #[serde(rename = "final")]
    pub final_text: String,
    pub embedding: EmbeddingVector,
}

/// Ordered audit record of one trial.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Transcript {
    pub events: Vec<Event>,
    pub final_topic: Option<String>,
    pub idea_records: Vec<IdeaRecord>,
    pub ballots: Vec<Ballot>,
    pub final_abstract: Option<String>,
}

/// Per-trial header persisted with the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMeta {
    pub seed: u64,
    pub config_digest: String,
    pub backend: String,
}

impl Transcript {
    pub fn record(
        &mut self,
        stage: Stage,
        round: u32,
        kind: EventKind,
        sender: impl Into<String>,
        receiver: impl Into<String>,
        payload: impl Into<String>,
    ) {
        self.events.push(Event {
            seq: self.events.len() as u64,
            stage,
            round,
            kind,
            sender: sender.into(),
            receiver: receiver.into(),
            payload: payload.into(),
        });
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn count_in_round(&self, kind: EventKind, round: u32) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == kind && e.round == round)
            .count()
    }

    /// Canonical line-delimited form: meta line, one line per event, summary.
    pub fn to_lines(&self, meta: &TranscriptMeta) -> Result<Vec<String>> {
        let mut lines = Vec::with_capacity(self.events.len() + 2);
        lines.push(tagged_line("meta", meta)?);
        for event in &self.events {
            lines.push(tagged_line("event", event)?);
        }
        let summary = serde_json::json!({
            "final_topic": self.final_topic,
            "idea_records": self.idea_records,
            "ballots": self.ballots,
            "final_abstract": self.final_abstract,
        });
        lines.push(tagged_line("summary", &summary)?);
        Ok(lines)
    }

    pub fn save(&self, path: &Path, meta: &TranscriptMeta) -> Result<()> {
        let mut content = self.to_lines(meta)?.join("\n");
        content.push('\n');
        std::fs::write(path, content).map_err(|e| Error::io(path, e))
    }
}

fn tagged_line<T: Serialize>(record: &str, value: &T) -> Result<String> {
    let mut value = serde_json::to_value(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    match value {
        Value::Object(ref mut map) => {
            map.insert("record".into(), Value::String(record.into()));
        }
        other => {
            let mut map = serde_json::Map::new();
            map.insert("record".into(), Value::String(record.into()));
            map.insert("value".into(), other);
            value = Value::Object(map);
        }
    }
    jsonl::canonical_line(&value)
}

/// Stage boundaries a trial can resume from, in protocol order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletedStage {
    None,
    Topic,
    Ideas,
    Winner,
    Abstract,
}

/// Resumable snapshot written when a stage aborts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config_digest: String,
    pub seed: u64,
    pub completed: CompletedStage,
    pub topic: Option<String>,
    pub ideas: Vec<IdeaRecord>,
    pub winner_index: Option<usize>,
    pub borda: Option<BordaResult>,
    pub ballots: Vec<Ballot>,
    pub final_abstract: Option<String>,
    pub events: Vec<Event>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut line = jsonl::canonical_line(self)?;
        line.push('\n');
        std::fs::write(path, line).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&content).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })
    }
}
