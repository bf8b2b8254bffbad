//! Deterministic in-process backends for offline runs and tests.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;

use reportsmith_core::metrics::{EmbeddingProvider, HashedBagEmbedder, ProviderError};
use reportsmith_core::report::{parse_sections, report_to_json};
use reportsmith_core::{SectionKind, StructuredReport};

use crate::client::{ChatBackend, Completion};
use crate::prompt::{extract_input, ChatMessage};

pub const FILLER_STEPS: [&str; 2] = ["Open the application.", "Navigate to the affected page."];
pub const FILLER_EXPECTED: &str = "The feature works as intended.";
pub const FILLER_ACTUAL: &str = "The feature does not work as intended.";
pub const FILLER_ADDITIONAL: &str = "Version: latest release.";
pub const NOT_PROVIDED: &str = "Not provided";

type Responder = Arc<dyn Fn(&str) -> Result<String, ProviderError> + Send + Sync>;

#[derive(Clone)]
pub enum MockBehavior {
    /// Structures the input with the heuristic parser and answers its JSON.
    PerfectExtractor,
    /// Like `PerfectExtractor`, but writes "Not provided" into empty
    /// sections and lists them under `missing_fields`.
    FlagMissing,
    /// Fills empty sections with fixed filler and flags nothing.
    Hallucinate,
    /// Returns the extracted input unchanged.
    Echo,
    Fixed(String),
    /// Canned answers keyed by input: exact match first, else the longest
    /// key contained in the input. Unknown inputs fail as unavailable.
    Scripted(BTreeMap<String, String>),
    /// Successive calls get successive answers; the last one repeats.
    Sequence(Vec<String>),
    Fail(ProviderError),
    Custom(Responder),
}

impl fmt::Debug for MockBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PerfectExtractor => f.write_str("PerfectExtractor"),
            Self::FlagMissing => f.write_str("FlagMissing"),
            Self::Hallucinate => f.write_str("Hallucinate"),
            Self::Echo => f.write_str("Echo"),
            Self::Fixed(s) => f.debug_tuple("Fixed").field(s).finish(),
            Self::Scripted(t) => f.debug_tuple("Scripted").field(&t.len()).finish(),
            Self::Sequence(s) => f.debug_tuple("Sequence").field(&s.len()).finish(),
            Self::Fail(e) => f.debug_tuple("Fail").field(e).finish(),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl FromStr for MockBehavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "perfect_extractor" | "perfect" => Ok(Self::PerfectExtractor),
            "flag_missing" => Ok(Self::FlagMissing),
            "hallucinate" => Ok(Self::Hallucinate),
            "echo" => Ok(Self::Echo),
            other => Err(format!(
                "unknown mock behavior `{other}` (expected perfect_extractor, flag_missing, hallucinate or echo)"
            )),
        }
    }
}

fn flag_missing_json(report: &StructuredReport) -> String {
    let empty: Vec<SectionKind> =
        SectionKind::BODY.into_iter().filter(|k| report.is_section_empty(*k)).collect();
    let text = |kind: SectionKind, value: &str| {
        if empty.contains(&kind) { NOT_PROVIDED.to_owned() } else { value.to_owned() }
    };
    let steps = if empty.contains(&SectionKind::StepsToReproduce) {
        vec![NOT_PROVIDED.to_owned()]
    } else {
        report.steps_to_reproduce.clone()
    };
    json!({
        "title": report.title,
        "steps_to_reproduce": steps,
        "expected_result": text(SectionKind::ExpectedResult, &report.expected_result),
        "actual_result": text(SectionKind::ActualResult, &report.actual_result),
        "additional_information": text(SectionKind::AdditionalInformation, &report.additional_information),
        "missing_fields": empty,
    })
    .to_string()
}

fn hallucinated(mut report: StructuredReport) -> StructuredReport {
    if report.steps_to_reproduce.is_empty() {
        report.steps_to_reproduce = FILLER_STEPS.iter().map(|s| s.to_string()).collect();
    }
    for (slot, filler) in [
        (&mut report.expected_result, FILLER_EXPECTED),
        (&mut report.actual_result, FILLER_ACTUAL),
        (&mut report.additional_information, FILLER_ADDITIONAL),
    ] {
        if slot.trim().is_empty() {
            *slot = filler.to_owned();
        }
    }
    report.missing_fields.clear();
    report
}

pub struct MockBackend {
    name: String,
    behavior: MockBehavior,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(behavior: MockBehavior) -> Self {
        Self::named("mock", behavior)
    }

    pub fn named(name: &str, behavior: MockBehavior) -> Self {
        Self { name: name.to_owned(), behavior, calls: AtomicUsize::new(0) }
    }

    pub fn scripted<K: Into<String>, V: Into<String>>(table: impl IntoIterator<Item = (K, V)>) -> Self {
        Self::new(MockBehavior::Scripted(
            table.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        ))
    }

    pub fn behavior(&self) -> &MockBehavior {
        &self.behavior
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Answer for a given unstructured input.
    pub fn respond(&self, input: &str) -> Result<String, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.behavior {
            MockBehavior::PerfectExtractor => Ok(report_to_json(&parse_sections(input))),
            MockBehavior::FlagMissing => Ok(flag_missing_json(&parse_sections(input))),
            MockBehavior::Hallucinate => Ok(report_to_json(&hallucinated(parse_sections(input)))),
            MockBehavior::Echo => Ok(input.to_owned()),
            MockBehavior::Fixed(s) => Ok(s.clone()),
            MockBehavior::Scripted(table) => table
                .get(input)
                .or_else(|| {
                    table
                        .iter()
                        .filter(|(k, _)| !k.is_empty() && input.contains(k.as_str()))
                        .max_by_key(|(k, _)| k.len())
                        .map(|(_, v)| v)
                })
                .cloned()
                .ok_or_else(|| ProviderError::Unavailable("no scripted response for input".into())),
            MockBehavior::Sequence(items) => items
                .get(n.min(items.len().saturating_sub(1)))
                .cloned()
                .ok_or_else(|| ProviderError::Unavailable("empty response sequence".into())),
            MockBehavior::Fail(e) => Err(e.clone()),
            MockBehavior::Custom(f) => f(input),
        }
    }
}

impl ChatBackend for MockBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn chat_complete(&self, messages: &[ChatMessage]) -> Result<Completion, ProviderError> {
        let content = self.respond(extract_input(messages))?;
        Ok(Completion { content, retry_count: 0, latency: Duration::ZERO })
    }
}

/// Embedding provider with fixed vectors per text; other texts use the
/// hashed-bag fallback when enabled.
#[derive(Debug, Clone, Default)]
pub struct ScriptedEmbedder {
    table: HashMap<String, Vec<f64>>,
    fallback: bool,
}

impl ScriptedEmbedder {
    pub fn new<K: Into<String>>(table: impl IntoIterator<Item = (K, Vec<f64>)>) -> Self {
        Self { table: table.into_iter().map(|(k, v)| (k.into(), v)).collect(), fallback: false }
    }

    pub fn with_fallback(mut self) -> Self {
        self.fallback = true;
        self
    }
}

impl EmbeddingProvider for ScriptedEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        match self.table.get(text) {
            Some(v) => Ok(v.clone()),
            None if self.fallback => Ok(HashedBagEmbedder::vector(text)),
            None => Err(ProviderError::Unavailable("no scripted embedding".into())),
        }
    }
}
