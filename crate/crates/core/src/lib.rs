//! Multi-agent scientific ideation engine.
//!
//! A team of researcher agents is assembled over a publication corpus, takes
//! a four-stage workflow to a finished abstract (topic discussion, idea
//! generation with cross-agent knowledge exchange, novelty review with
//! weighted Borda voting, sequential abstract refinement) and the result is
//! scored against the corpus with embedding-based novelty metrics. A
//! deterministic scripted backend stands in for the chat/embedding service
//! so the whole protocol is verifiable offline; live OpenAI-compatible
//! endpoints plug in through the same gateway.

pub mod corpus;
pub mod embed;
mod error;
pub mod experiment;
pub mod gateway;
mod jsonl;
pub mod metrics;
pub mod par;
pub mod protocol;
pub mod rng;
pub mod team;
pub mod voting;

pub use error::{Error, Result};
