//! Four-stage ideation workflow: topic discussion, idea generation with
//! cross-agent knowledge exchange, novelty check with voting, and abstract
//! generation, with a fully ordered transcript and stage-boundary
//! checkpoints.

mod engine;
mod prompts;
mod transcript;

pub use engine::{
    augment_prompt, Engine, ReviewerPool, RunConfig, TrialOutcome, TrialRun,
};
pub use prompts::PromptBundle;
pub use transcript::{
    Checkpoint, CompletedStage, Event, EventKind, IdeaRecord, Stage, Transcript, TranscriptMeta,
};
