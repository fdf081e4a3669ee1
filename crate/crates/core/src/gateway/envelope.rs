//! Message envelope shared by the protocol engine and the scripted backend.
//!
//! Every stage prompt leads with a tag line (`IDEA:`, `REVISE:`, ...), the
//! stage's primary payload on the following lines, a `---` separator, an
//! `AGENT:` line naming the sender, and then free-form instructions. A live
//! model reads the whole message; the scripted backend keys its response on
//! the tag and can echo the payload back, which makes every protocol
//! property assertable offline.

pub const SECTION_SEPARATOR: &str = "---";
pub const AGENT_PREFIX: &str = "AGENT:";
pub const CANDIDATE_PREFIX: &str = "CANDIDATE:";

/// Builds the enveloped user message for one stage call.
pub fn compose(tag: &str, payload: &str, agent: &str, instructions: &str) -> String {
    format!(
        "{tag}:\n{payload}\n{SECTION_SEPARATOR}\n{AGENT_PREFIX} {agent}\n{instructions}\n"
    )
}

/// Formats one candidate listing line: `CANDIDATE: <key> :: <digest>`.
/// Digests are flattened to a single line.
pub fn candidate_line(key: &str, digest: &str) -> String {
    let flat: String = digest
        .chars()
        .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
        .collect();
    format!("{CANDIDATE_PREFIX} {key} :: {flat}")
}

/// Fields recovered from an enveloped message.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Extracted {
    pub tag: Option<String>,
    pub payload: String,
    pub agent: Option<String>,
    pub candidates: Vec<String>,
}

fn leading_tag(line: &str) -> Option<(String, &str)> {
    let colon = line.find(':')?;
    let (head, rest) = line.split_at(colon);
    if head.is_empty()
        || !head
            .chars()
            .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
        || !head.chars().next().is_some_and(|c| c.is_ascii_uppercase())
    {
        return None;
    }
    Some((head.to_string(), rest[1..].trim_start()))
}

/// Recovers tag, payload, agent, and candidate keys from a message.
pub fn extract(message: &str) -> Extracted {
    let mut out = Extracted::default();
    let mut lines = message.lines();
    let mut payload_lines: Vec<&str> = Vec::new();
    if let Some(first) = lines.next() {
        match leading_tag(first) {
            Some((tag, rest)) => {
                out.tag = Some(tag);
                if !rest.is_empty() {
                    payload_lines.push(rest);
                }
                for line in lines.by_ref() {
                    if line.trim() == SECTION_SEPARATOR {
                        break;
                    }
                    payload_lines.push(line);
                }
            }
            None => payload_lines.push(first),
        }
    }
    out.payload = payload_lines.join("\n");
    for line in message.lines() {
        if let Some(agent) = line.strip_prefix(AGENT_PREFIX) {
            if out.agent.is_none() {
                out.agent = Some(agent.trim().to_string());
            }
        }
        if let Some(rest) = line.strip_prefix(CANDIDATE_PREFIX) {
            let key = rest.split("::").next().unwrap_or("").trim();
            if !key.is_empty() {
                out.candidates.push(key.to_string());
            }
        }
    }
    out
}
