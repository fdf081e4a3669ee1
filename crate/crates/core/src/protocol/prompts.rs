//! Stage prompt templates.
//!
//! Each template is a complete enveloped message (tag line, payload section,
//! `---`, `AGENT:` line, instructions). The engine substitutes `{placeholder}`
//! tokens; substitution is single-pass, so braces inside substituted content
//! are never re-expanded. Custom bundles must keep each stage's required
//! placeholders; validation checks exactly that.

use crate::error::{Error, Result};
use crate::gateway::envelope;

/// Templates for every stage call the protocol makes.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub topic_prompt: String,
    pub score_prompt: String,
    pub generation_prompt: String,
    pub revision_prompt: String,
    pub synthesis_prompt: String,
    pub reflection_prompt: String,
    pub review_prompt: String,
    pub judge_prompt: String,
    pub draft_prompt: String,
    pub refinement_prompt: String,
}

impl Default for PromptBundle {
    fn default() -> Self {
        PromptBundle {
            topic_prompt: envelope::compose(
                "TOPIC",
                "{dialogue}",
                "{agent}",
                "Your background: {profile}\n\
                 The payload above lists topics proposed so far. Propose exactly one \
                 concise research topic that plays to your expertise. Reply with the \
                 topic text only.",
            ),
            score_prompt: envelope::compose(
                "SCORE",
                "{candidates}",
                "{agent}",
                "Score every candidate topic above for novelty and feasibility. Reply \
                 with one line per candidate, formatted `index: score`, integer scores \
                 from 1 (weak) to 10 (strong).",
            ),
            generation_prompt: envelope::compose(
                "IDEA",
                "{prior}",
                "{agent}",
                "Your background: {profile}\n\
                 Team topic: {topic}\n\
                 Building on the seed in the payload above and the references below, \
                 propose one novel research idea: motivation, approach, and expected \
                 contribution.",
            ),
            revision_prompt: envelope::compose(
                "REVISE",
                "{idea}",
                "{agent}",
                "Your background: {profile}\n\
                 Revise the idea in the payload above from your own expertise: correct \
                 weaknesses, add what the originator missed, keep what works. Reply \
                 with the full revised idea.",
            ),
            synthesis_prompt: envelope::compose(
                "SYNTH",
                "{revisions}",
                "{agent}",
                "Your background: {profile}\n\
                 You are the team leader. The payload above holds every scientist's \
                 revision of one idea. Synthesize them into a single coherent feedback \
                 summary for the originator.",
            ),
            reflection_prompt: envelope::compose(
                "REFLECT",
                "{synthesis}",
                "{agent}",
                "Your original idea:\n{idea}\n\
                 The payload above is the leader's synthesized feedback. Integrate it \
                 and reply with the final version of your idea.",
            ),
            review_prompt: envelope::compose(
                "RANK",
                "{candidates}",
                "{agent}",
                "Reference papers assigned to you:\n{references}\n\
                 Rank all candidate ideas above by novelty, feasibility, and impact. \
                 Reply with one line per idea, formatted `idea_id:rank:confidence`, \
                 ranks forming a strict permutation starting at 1 (best) and integer \
                 confidences from 1 to 10.",
            ),
            judge_prompt: envelope::compose(
                "JUDGE",
                "{candidates}",
                "{agent}",
                "You are the team leader. Pick the single strongest idea among the \
                 candidates above. Reply with its idea_id.",
            ),
            draft_prompt: envelope::compose(
                "DRAFT",
                "{idea}",
                "{agent}",
                "Write a complete scientific abstract for the winning idea in the \
                 payload above. Reply with the abstract only.",
            ),
            refinement_prompt: envelope::compose(
                "REFINE",
                "{draft}",
                "{agent}",
                "The payload above is the current abstract draft for this idea:\n{idea}\n\
                 Apply one careful refinement pass and reply with the full improved \
                 abstract.",
            ),
        }
    }
}

impl PromptBundle {
    /// Checks that every template still carries its stage's placeholders.
    pub fn validate(&self) -> Result<()> {
        let requirements: [(&str, &String, &[&str]); 10] = [
            ("topic_prompt", &self.topic_prompt, &["{agent}", "{profile}", "{dialogue}"]),
            ("score_prompt", &self.score_prompt, &["{agent}", "{candidates}"]),
            (
                "generation_prompt",
                &self.generation_prompt,
                &["{agent}", "{profile}", "{topic}", "{prior}"],
            ),
            ("revision_prompt", &self.revision_prompt, &["{agent}", "{profile}", "{idea}"]),
            (
                "synthesis_prompt",
                &self.synthesis_prompt,
                &["{agent}", "{profile}", "{revisions}"],
            ),
            (
                "reflection_prompt",
                &self.reflection_prompt,
                &["{agent}", "{idea}", "{synthesis}"],
            ),
            (
                "review_prompt",
                &self.review_prompt,
                &["{agent}", "{candidates}", "{references}"],
            ),
            ("judge_prompt", &self.judge_prompt, &["{agent}", "{candidates}"]),
            ("draft_prompt", &self.draft_prompt, &["{agent}", "{idea}"]),
            (
                "refinement_prompt",
                &self.refinement_prompt,
                &["{agent}", "{draft}", "{idea}"],
            ),
        ];
        for (name, template, placeholders) in requirements {
            for placeholder in placeholders {
                if !template.contains(placeholder) {
                    return Err(Error::Config(format!(
                        "{name} template is missing the {placeholder} placeholder"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Single-pass `{key}` substitution; unknown braces stay literal and
/// substituted values are never re-scanned.
pub(crate) fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start..];
        match after.find('}') {
            Some(end) => {
                let key = &after[1..end];
                if let Some((_, value)) = vars.iter().find(|(k, _)| *k == key) {
                    out.push_str(value);
                    rest = &after[end + 1..];
                } else {
                    out.push('{');
                    rest = &after[1..];
                }
            }
            None => {
                out.push_str(after);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
