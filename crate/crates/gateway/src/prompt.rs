//! Prompt templates and message assembly.
//!
//! The two templates are transcriptions; their byte-exact form is pinned by
//! the golden files under `fixtures/prompts/`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use reportsmith_core::report::report_to_json;
use reportsmith_core::StructuredReport;

/// Role line that opens the Alpaca template and doubles as the chat system message.
pub const SYSTEM_ROLE: &str =
    "You are a senior software engineer specialized in generating detailed bug reports.";

pub const INSTRUCTION: &str = "Please create a bug report that includes the following sections:
1. Steps to Reproduce (S2R): Detailed steps to replicate the issue.
2. Expected Result (ER): What you expected to happen.
3. Actual Result (AR): What actually happened.
4. Additional Information: Include relevant details such as software version, build number, environment, etc.

If any of these sections are missing from the provided report, explicitly notify the user which information is missing.";

/// Extra line for chat backends that were not tuned on the JSON output format.
pub const JSON_DIRECTIVE: &str = "Respond with a single JSON object with the keys \"title\", \"steps_to_reproduce\", \"expected_result\", \"actual_result\", \"additional_information\" and \"missing_fields\".";

pub const SYNTHESIS_TEMPLATE: &str = "Please rewrite the following bug report in a natural, conversational tone,
as if you're explaining it to someone casually. Keep the essence of the report
intact, but restructure it in a way that sounds like something an average
person would write, while still using the original wording from the report as
much as possible. Focus on maintaining the original details and key points
without changing much. Provide only the one rewritten paragraph with everything,
no additional explanation.

Bug report: {text}";

pub const INPUT_MARKER: &str = "### Input:\n";
pub const RESPONSE_MARKER: &str = "### Response:\n";
pub const SYNTHESIS_MARKER: &str = "Bug report: ";

/// Default shot count for chat-style few-shot runs.
pub const DEFAULT_SHOTS: usize = 3;

pub fn build_alpaca_prompt(unstructured: &str) -> String {
    format!("{SYSTEM_ROLE}\n### Instruction:\n{INSTRUCTION}\n\n{INPUT_MARKER}{unstructured}\n\n{RESPONSE_MARKER}")
}

pub fn build_synthesis_prompt(structured_text: &str) -> String {
    SYNTHESIS_TEMPLATE.replacen("{text}", structured_text, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// One worked example: unstructured input and its structured answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub input: String,
    pub output: StructuredReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub shots: Vec<Shot>,
}

impl PromptBundle {
    pub fn new(shots: Vec<Shot>, unstructured: &str) -> Self {
        Self {
            system: SYSTEM_ROLE.to_owned(),
            user: chat_user_message(unstructured),
            shots,
        }
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(2 + 2 * self.shots.len());
        out.push(ChatMessage::system(&self.system));
        for shot in &self.shots {
            out.push(ChatMessage::user(chat_user_message(&shot.input)));
            out.push(ChatMessage::assistant(report_to_json(&shot.output)));
        }
        out.push(ChatMessage::user(&self.user));
        out
    }
}

/// User turn for chat backends: instruction, JSON directive, then the input.
pub fn chat_user_message(unstructured: &str) -> String {
    format!("### Instruction:\n{INSTRUCTION}\n{JSON_DIRECTIVE}\n\n{INPUT_MARKER}{unstructured}")
}

/// System message, one user/assistant pair per shot, then the target.
pub fn build_fewshot_messages(shots: &[Shot], unstructured: &str) -> Vec<ChatMessage> {
    PromptBundle::new(shots.to_vec(), unstructured).messages()
}

/// Messages for the single-turn Alpaca path used by tuned models.
pub fn build_alpaca_messages(unstructured: &str) -> Vec<ChatMessage> {
    vec![ChatMessage::user(build_alpaca_prompt(unstructured))]
}

/// Draws `k` exemplars from `pool`, skipping any whose id equals `exclude`.
/// Same seed, same pool, same picks.
pub fn sample_shots<'a, T>(
    pool: &'a [(String, T)],
    k: usize,
    seed: u64,
    exclude: Option<&str>,
) -> Vec<&'a T> {
    let mut eligible: Vec<&(String, T)> = pool
        .iter()
        .filter(|(id, _)| Some(id.as_str()) != exclude)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    eligible.shuffle(&mut rng);
    eligible.into_iter().take(k).map(|(_, t)| t).collect()
}

/// The unstructured text a prompt was built around, for offline backends.
pub fn extract_input(messages: &[ChatMessage]) -> &str {
    let Some(last) = messages.iter().rev().find(|m| m.role == Role::User) else {
        return "";
    };
    let content = last.content.as_str();
    if let Some(at) = content.rfind(INPUT_MARKER) {
        let rest = &content[at + INPUT_MARKER.len()..];
        return match rest.rfind(&format!("\n\n{RESPONSE_MARKER}")) {
            Some(end) => &rest[..end],
            None => rest,
        };
    }
    if let Some(at) = content.rfind(SYNTHESIS_MARKER) {
        return &content[at + SYNTHESIS_MARKER.len()..];
    }
    content
}
