//! Deterministic scripted backend.
//!
//! Responses are a pure function of (system prompt, messages, seed): the tag
//! of the last user message selects a template from the script; unmatched
//! tags yield a filler paragraph derived from the request digest. Embeddings
//! are hash-derived vectors, stable across runs and platforms.
//!
//! Template placeholders:
//! - `{body}`: the payload section of the last user message
//! - `{agent}`: the `AGENT:` line value
//! - `{hash8}`: first 8 hex chars of the request digest
//! - `{seed}`: the request seed
//! - `{scores_all}`: one `key: score` line per `CANDIDATE:` key
//! - `{candidates_ranked}`: one `key:rank:confidence` ballot line per key
//!
//! The reserved template `<<FAIL>>` makes the matched tag fail with a
//! transport error, which is how tests exercise checkpoint/resume paths.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::envelope;
use super::{Backend, ChatRequest, Role};
use crate::error::{Error, Result};
use crate::jsonl;

pub const FAIL_TEMPLATE: &str = "<<FAIL>>";

/// Tag → response template map, loadable from a line-delimited record file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    entries: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct ScriptRecord {
    tag: String,
    template: String,
}

impl Script {
    pub fn new() -> Self {
        Script::default()
    }

    pub fn set(&mut self, tag: impl Into<String>, template: impl Into<String>) -> &mut Self {
        self.entries.insert(tag.into(), template.into());
        self
    }

    pub fn get(&self, tag: &str) -> Option<&str> {
        self.entries.get(tag).map(|s| s.as_str())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut script = Script::new();
        for (line, record) in jsonl::read_file::<ScriptRecord>(path)? {
            if script.entries.contains_key(&record.tag) {
                return Err(Error::MalformedRecord {
                    path: path.to_path_buf(),
                    line,
                    message: format!("duplicate script tag `{}`", record.tag),
                });
            }
            script.entries.insert(record.tag, record.template);
        }
        Ok(script)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_file(
            path,
            self.entries.iter().map(|(tag, template)| ScriptRecord {
                tag: tag.clone(),
                template: template.clone(),
            }),
        )
    }

    /// Parsable deterministic responses for every protocol stage, enough to
    /// drive complete trials offline.
    pub fn protocol_demo() -> Self {
        let mut script = Script::new();
        script
            .set("TOPIC", "Adaptive methods for open problems ({hash8})")
            .set("SCORE", "{scores_all}")
            .set("IDEA", "Idea[{hash8}] by {agent}: a study design grounded in the team topic.")
            .set("REVISE", "{body}\n[revised by {agent} / {hash8}]")
            .set("SYNTH", "Synthesis by {agent} ({hash8}):\n{body}")
            .set("REFLECT", "{body}\n[reflected by {agent} / {hash8}]")
            .set("RANK", "{candidates_ranked}")
            .set("JUDGE", "{candidates_ranked}")
            .set("DRAFT", "Abstract[{hash8}] drafted by {agent}.\n{body}")
            .set("REFINE", "{body}\n[refined by {agent} / {hash8}]");
        script
    }
}

/// Offline stand-in for the chat/embedding service.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: Script,
    default_seed: u64,
    embed_dim: usize,
}

pub const DEFAULT_EMBED_DIM: usize = 64;

impl ScriptedBackend {
    pub fn new(script: Script, default_seed: u64, embed_dim: usize) -> Self {
        ScriptedBackend {
            script,
            default_seed,
            embed_dim,
        }
    }

    fn request_digest(&self, request: &ChatRequest) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(request.system_prompt.as_bytes());
        for message in &request.messages {
            hasher.update([0x1e]);
            hasher.update(match message.role {
                Role::System => b"s",
                Role::User => b"u",
                Role::Assistant => b"a",
            });
            hasher.update([0x1f]);
            hasher.update(message.content.as_bytes());
        }
        hasher.update(request.seed.unwrap_or(self.default_seed).to_le_bytes());
        hasher.finalize().into()
    }

    fn render(&self, template: &str, parsed: &envelope::Extracted, digest: &[u8; 32], seed: u64) -> String {
        let hash8 = hex_prefix(digest, 8);
        let mut out = template.to_string();
        out = out.replace("{body}", &parsed.payload);
        out = out.replace("{agent}", parsed.agent.as_deref().unwrap_or("unknown"));
        out = out.replace("{hash8}", &hash8);
        out = out.replace("{seed}", &seed.to_string());
        if out.contains("{scores_all}") {
            out = out.replace("{scores_all}", &self.scores_all(parsed, digest));
        }
        if out.contains("{candidates_ranked}") {
            out = out.replace("{candidates_ranked}", &self.candidates_ranked(parsed, digest));
        }
        out
    }

    fn keyed(&self, digest: &[u8; 32], key: &str) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(digest);
        hasher.update([0x1f]);
        hasher.update(key.as_bytes());
        let bytes: [u8; 32] = hasher.finalize().into();
        u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
    }

    fn scores_all(&self, parsed: &envelope::Extracted, digest: &[u8; 32]) -> String {
        parsed
            .candidates
            .iter()
            .map(|key| format!("{key}: {}", 1 + self.keyed(digest, key) % 10))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn candidates_ranked(&self, parsed: &envelope::Extracted, digest: &[u8; 32]) -> String {
        let mut keyed: Vec<(u64, &String)> = parsed
            .candidates
            .iter()
            .map(|key| (self.keyed(digest, key), key))
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        keyed
            .iter()
            .enumerate()
            .map(|(rank, (k, key))| format!("{key}:{}:{}", rank + 1, 1 + k % 10))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn filler(&self, digest: &[u8; 32]) -> String {
        const WORDS: &[&str] = &[
            "adaptive", "analysis", "baseline", "cohort", "design", "dynamics", "embedding",
            "evaluation", "framework", "gradient", "hypothesis", "inference", "integration",
            "latent", "mechanism", "modeling", "network", "protocol", "robustness", "sampling",
            "signal", "structure", "synthesis", "variance",
        ];
        let mut key = [0u8; 32];
        key.copy_from_slice(digest);
        let mut stream = ChaCha12Rng::from_seed(key);
        let words: Vec<&str> = (0..30)
            .map(|_| WORDS[stream.gen_range(0..WORDS.len())])
            .collect();
        format!("({}) {}.", hex_prefix(digest, 8), words.join(" "))
    }
}

fn hex_prefix(digest: &[u8; 32], chars: usize) -> String {
    digest
        .iter()
        .flat_map(|b| [b >> 4, b & 0xf])
        .take(chars)
        .map(|n| char::from_digit(n as u32, 16).expect("hex digit"))
        .collect()
}

impl Backend for ScriptedBackend {
    fn chat_attempt(&self, request: &ChatRequest) -> Result<String> {
        let last_user = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        let parsed = envelope::extract(last_user);
        let digest = self.request_digest(request);
        let seed = request.seed.unwrap_or(self.default_seed);
        let response = match parsed.tag.as_deref().and_then(|tag| self.script.get(tag)) {
            Some(FAIL_TEMPLATE) => {
                return Err(Error::Transport {
                    attempts: 1,
                    message: format!(
                        "scripted failure for tag `{}`",
                        parsed.tag.as_deref().unwrap_or("?")
                    ),
                })
            }
            Some(template) => self.render(template, &parsed, &digest, seed),
            None => self.filler(&digest),
        };
        if response.is_empty() {
            return Err(Error::EmptyCompletion);
        }
        Ok(response)
    }

    fn embed_attempt(&self, text: &str) -> Result<Vec<f64>> {
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        hasher.update([0x1f]);
        hasher.update(self.default_seed.to_le_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        let mut stream = ChaCha12Rng::from_seed(key);
        Ok((0..self.embed_dim)
            .map(|_| stream.gen_range(-1.0..1.0))
            .collect())
    }

    fn identity(&self) -> String {
        format!(
            "scripted(seed={}, dim={})",
            self.default_seed, self.embed_dim
        )
    }
}
