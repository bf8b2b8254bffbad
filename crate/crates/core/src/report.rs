//! Bug-report document model.
//!
//! [`parse_sections`] pulls template sections out of free text using a
//! case-insensitive header alias table; [`render_report`] writes the canonical
//! template layout back out. The two are inverse on normalized reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Literal placeholder rendered for flagged sections.
pub const MISSING_MARKER: &str = "<MISSING>";

/// Longest first line accepted as an implicit title.
pub const MAX_IMPLICIT_TITLE_CHARS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionKind {
    Title,
    StepsToReproduce,
    ExpectedResult,
    ActualResult,
    AdditionalInformation,
}

impl SectionKind {
    pub const ALL: [SectionKind; 5] = [
        SectionKind::Title,
        SectionKind::StepsToReproduce,
        SectionKind::ExpectedResult,
        SectionKind::ActualResult,
        SectionKind::AdditionalInformation,
    ];

    /// The four sections that may be flagged missing.
    pub const BODY: [SectionKind; 4] = [
        SectionKind::StepsToReproduce,
        SectionKind::ExpectedResult,
        SectionKind::ActualResult,
        SectionKind::AdditionalInformation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Title => "title",
            SectionKind::StepsToReproduce => "steps_to_reproduce",
            SectionKind::ExpectedResult => "expected_result",
            SectionKind::ActualResult => "actual_result",
            SectionKind::AdditionalInformation => "additional_information",
        }
    }

    /// Short column prefix used in CSV output.
    pub fn abbrev(self) -> &'static str {
        match self {
            SectionKind::Title => "title",
            SectionKind::StepsToReproduce => "s2r",
            SectionKind::ExpectedResult => "er",
            SectionKind::ActualResult => "ar",
            SectionKind::AdditionalInformation => "ai",
        }
    }

    pub fn is_body(self) -> bool {
        self != SectionKind::Title
    }
}

impl fmt::Display for SectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown section kind `{0}`")]
pub struct UnknownSection(pub String);

impl FromStr for SectionKind {
    type Err = UnknownSection;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SectionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownSection(s.to_owned()))
    }
}

/// Canonical five-field bug report plus missing-field flags.
///
/// Field order matches the JSON schema; `missing_fields` is ordered by
/// [`SectionKind`] so serialization is stable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredReport {
    pub title: String,
    pub steps_to_reproduce: Vec<String>,
    pub expected_result: String,
    pub actual_result: String,
    pub additional_information: String,
    pub missing_fields: BTreeSet<SectionKind>,
}

impl StructuredReport {
    /// A report with every body section empty and flagged.
    pub fn all_missing() -> Self {
        Self {
            missing_fields: SectionKind::BODY.into_iter().collect(),
            ..Self::default()
        }
    }

    /// Text of a section; steps are newline-joined.
    pub fn section_text(&self, kind: SectionKind) -> String {
        match kind {
            SectionKind::Title => self.title.clone(),
            SectionKind::StepsToReproduce => self.steps_to_reproduce.join("\n"),
            SectionKind::ExpectedResult => self.expected_result.clone(),
            SectionKind::ActualResult => self.actual_result.clone(),
            SectionKind::AdditionalInformation => self.additional_information.clone(),
        }
    }

    pub fn is_section_empty(&self, kind: SectionKind) -> bool {
        match kind {
            SectionKind::StepsToReproduce => self.steps_to_reproduce.is_empty(),
            other => self.section_text(other).trim().is_empty(),
        }
    }

    /// Empties a body section and flags it. Title is cleared but never flagged.
    pub fn clear_section(&mut self, kind: SectionKind) {
        match kind {
            SectionKind::Title => self.title.clear(),
            SectionKind::StepsToReproduce => self.steps_to_reproduce.clear(),
            SectionKind::ExpectedResult => self.expected_result.clear(),
            SectionKind::ActualResult => self.actual_result.clear(),
            SectionKind::AdditionalInformation => self.additional_information.clear(),
        }
        if kind.is_body() {
            self.missing_fields.insert(kind);
        }
    }

    /// Concatenated body sections (no title), one section per line block.
    pub fn body_text(&self) -> String {
        SectionKind::BODY
            .into_iter()
            .map(|k| self.section_text(k))
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Checks the structural invariants of the type.
    pub fn validate(&self) -> Result<(), ReportError> {
        if self.missing_fields.contains(&SectionKind::Title) {
            return Err(ReportError::Invariant("title cannot be flagged missing".into()));
        }
        for kind in &self.missing_fields {
            if !self.is_section_empty(*kind) {
                return Err(ReportError::Invariant(format!(
                    "{kind} is flagged missing but not empty"
                )));
            }
        }
        if self.steps_to_reproduce.iter().any(|s| s.trim().is_empty()) {
            return Err(ReportError::Invariant("blank step".into()));
        }
        Ok(())
    }

    /// Whitespace-normalized copy whose flags equal exactly its empty body
    /// sections. `parse_sections(render_report(r)) == r.normalized()` for
    /// content that does not itself look like a section header.
    pub fn normalized(&self) -> Self {
        let mut out = Self {
            title: collapse_line(&self.title),
            steps_to_reproduce: self
                .steps_to_reproduce
                .iter()
                .map(|s| collapse_line(s))
                .filter(|s| !s.is_empty())
                .collect(),
            expected_result: normalize_block(&self.expected_result),
            actual_result: normalize_block(&self.actual_result),
            additional_information: normalize_block(&self.additional_information),
            missing_fields: BTreeSet::new(),
        };
        for kind in SectionKind::BODY {
            if out.is_section_empty(kind) {
                out.missing_fields.insert(kind);
            }
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("report invariant violated: {0}")]
    Invariant(String),
}

/// Unstructured reporter text as fetched or typed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawReport {
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub source_meta: BTreeMap<String, String>,
}

impl RawReport {
    pub fn new(body: impl Into<String>) -> Result<Self, ReportError> {
        let body = body.into();
        if body.trim().is_empty() {
            return Err(ReportError::Invariant("report body is empty".into()));
        }
        Ok(Self { body, source_id: None, source_meta: BTreeMap::new() })
    }
}

/// Trims each line, drops blank lines, joins with `\n`.
pub fn normalize_block(text: &str) -> String {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

fn collapse_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

struct HeaderAlias {
    kind: SectionKind,
    pattern: &'static str,
}

const HEADER_ALIASES: &[HeaderAlias] = &[
    HeaderAlias { kind: SectionKind::StepsToReproduce, pattern: r"steps\s+to\s+reproduce" },
    HeaderAlias { kind: SectionKind::StepsToReproduce, pattern: r"reproduction\s+steps" },
    HeaderAlias { kind: SectionKind::StepsToReproduce, pattern: r"str" },
    HeaderAlias { kind: SectionKind::StepsToReproduce, pattern: r"s2rs?" },
    HeaderAlias { kind: SectionKind::StepsToReproduce, pattern: r"steps" },
    HeaderAlias { kind: SectionKind::ExpectedResult, pattern: r"expected\s+results?" },
    HeaderAlias { kind: SectionKind::ExpectedResult, pattern: r"expected\s+behaviou?r" },
    HeaderAlias { kind: SectionKind::ExpectedResult, pattern: r"expected" },
    HeaderAlias { kind: SectionKind::ActualResult, pattern: r"actual\s+results?" },
    HeaderAlias { kind: SectionKind::ActualResult, pattern: r"actual\s+behaviou?r" },
    HeaderAlias { kind: SectionKind::ActualResult, pattern: r"observed\s+behaviou?r" },
    HeaderAlias { kind: SectionKind::ActualResult, pattern: r"actual" },
    HeaderAlias { kind: SectionKind::AdditionalInformation, pattern: r"additional\s+information" },
    HeaderAlias { kind: SectionKind::AdditionalInformation, pattern: r"additional\s+info" },
    HeaderAlias { kind: SectionKind::AdditionalInformation, pattern: r"environment" },
];

static HEADER_RES: Lazy<Vec<(SectionKind, Regex)>> = Lazy::new(|| {
    HEADER_ALIASES
        .iter()
        .map(|a| (a.kind, header_regex(a.pattern)))
        .collect()
});

static TITLE_RE: Lazy<Regex> = Lazy::new(|| header_regex("title"));

static STEP_PREFIX_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\s*(\d+[.)]|[-*•])\s+").expect("static regex"));

// Header alone on its line (optional colon), or header + colon + inline text.
// Markdown heading marks and bold/underline wrappers are tolerated.
fn header_regex(alias: &str) -> Regex {
    Regex::new(&format!(
        r"(?i)^\s*(?:#{{1,6}}\s*)?(?:\*\*|__)?\s*(?:{alias})\s*(?:\(\w+\)\s*)?(?:\*\*|__)?\s*(?::\s*(?:\*\*|__)?\s*(?P<rest>.*?))?\s*$"
    ))
    .expect("header regex")
}

enum LineKind<'a> {
    Title(&'a str),
    Header(SectionKind, &'a str),
    Content,
}

fn classify(line: &str) -> LineKind<'_> {
    if let Some(c) = TITLE_RE.captures(line) {
        if line.contains(':') {
            return LineKind::Title(c.name("rest").map_or("", |m| m.as_str()));
        }
    }
    for (kind, re) in HEADER_RES.iter() {
        if let Some(c) = re.captures(line) {
            return LineKind::Header(*kind, c.name("rest").map_or("", |m| m.as_str()));
        }
    }
    LineKind::Content
}

/// Returns the step text if `line` starts with a list marker.
pub fn strip_step_prefix(line: &str) -> Option<&str> {
    STEP_PREFIX_RE.find(line).map(|m| &line[m.end()..])
}

/// Splits a steps block into individual steps.
///
/// Numbered or bulleted lines start a step; other lines continue the previous
/// one.
pub fn split_steps(block: &str) -> Vec<String> {
    let mut steps: Vec<String> = Vec::new();
    for line in block.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed == MISSING_MARKER {
            continue;
        }
        match strip_step_prefix(line) {
            Some(rest) => {
                let rest = collapse_line(rest);
                if !rest.is_empty() {
                    steps.push(rest);
                }
            }
            None => match steps.last_mut() {
                Some(prev) => {
                    prev.push(' ');
                    prev.push_str(&collapse_line(trimmed));
                }
                None => steps.push(collapse_line(trimmed)),
            },
        }
    }
    steps
}

/// Extracts template sections from free text. Total and deterministic.
pub fn parse_sections(body: &str) -> StructuredReport {
    let mut explicit_title: Option<String> = None;
    let mut preamble: Vec<&str> = Vec::new();
    let mut blocks: BTreeMap<SectionKind, Vec<&str>> = BTreeMap::new();
    // `None` before the first header; `Some(None)` inside a duplicate block.
    let mut current: Option<Option<SectionKind>> = None;
    let mut saw_header = false;

    for line in body.lines() {
        match classify(line) {
            LineKind::Title(rest) => {
                if explicit_title.is_none() {
                    explicit_title = Some(collapse_line(rest));
                }
                current = Some(None);
            }
            LineKind::Header(kind, rest) => {
                saw_header = true;
                if blocks.contains_key(&kind) {
                    current = Some(None);
                } else {
                    let block = blocks.entry(kind).or_default();
                    if !rest.is_empty() {
                        block.push(rest);
                    }
                    current = Some(Some(kind));
                }
            }
            LineKind::Content => match current {
                None => preamble.push(line),
                Some(Some(kind)) => blocks.get_mut(&kind).expect("open block").push(line),
                Some(None) => {}
            },
        }
    }

    let title = match explicit_title {
        Some(t) => t,
        None if saw_header => preamble
            .iter()
            .map(|l| l.trim())
            .find(|l| !l.is_empty())
            .filter(|l| l.chars().count() <= MAX_IMPLICIT_TITLE_CHARS)
            .map(collapse_line)
            .unwrap_or_default(),
        None => String::new(),
    };

    let text_of = |kind: SectionKind| -> String {
        let joined = blocks.get(&kind).map(|lines| lines.join("\n")).unwrap_or_default();
        let text = normalize_block(&joined);
        if text == MISSING_MARKER {
            String::new()
        } else {
            text
        }
    };

    let mut report = StructuredReport {
        title,
        steps_to_reproduce: blocks
            .get(&SectionKind::StepsToReproduce)
            .map(|lines| split_steps(&lines.join("\n")))
            .unwrap_or_default(),
        expected_result: text_of(SectionKind::ExpectedResult),
        actual_result: text_of(SectionKind::ActualResult),
        additional_information: text_of(SectionKind::AdditionalInformation),
        missing_fields: BTreeSet::new(),
    };
    for kind in SectionKind::BODY {
        if report.is_section_empty(kind) {
            report.missing_fields.insert(kind);
        }
    }
    report
}

/// Canonical template text for a report.
pub fn render_report(report: &StructuredReport) -> String {
    let mut out = String::new();
    out.push_str("Title: ");
    out.push_str(&report.title);
    out.push('\n');

    out.push_str("Steps to Reproduce\n");
    if report.missing_fields.contains(&SectionKind::StepsToReproduce) {
        out.push_str(MISSING_MARKER);
        out.push('\n');
    } else {
        for (i, step) in report.steps_to_reproduce.iter().enumerate() {
            out.push_str(&format!("{}. {}\n", i + 1, step));
        }
    }

    for (kind, header) in [
        (SectionKind::ExpectedResult, "Expected Results:"),
        (SectionKind::ActualResult, "Actual Results:"),
        (SectionKind::AdditionalInformation, "Additional Information:"),
    ] {
        out.push_str(header);
        out.push('\n');
        if report.missing_fields.contains(&kind) {
            out.push_str(MISSING_MARKER);
            out.push('\n');
        } else {
            let text = report.section_text(kind);
            if !text.is_empty() {
                out.push_str(&text);
                out.push('\n');
            }
        }
    }
    out
}

/// Serializes with the fixed key order of the report schema.
pub fn report_to_json(report: &StructuredReport) -> String {
    serde_json::to_string(report).expect("report serialization is infallible")
}

#[derive(Deserialize)]
struct WireReport {
    title: String,
    steps_to_reproduce: Vec<String>,
    expected_result: String,
    actual_result: String,
    additional_information: String,
    missing_fields: Vec<String>,
}

/// Strict inverse of [`report_to_json`]. Unknown keys are ignored.
pub fn json_to_report(text: &str) -> Result<StructuredReport, ReportError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| ReportError::MalformedDocument(e.to_string()))?;
    if !value.is_object() {
        return Err(ReportError::MalformedDocument("expected a JSON object".into()));
    }
    let wire: WireReport = serde_json::from_value(value)
        .map_err(|e| ReportError::MalformedDocument(e.to_string()))?;
    let mut missing_fields = BTreeSet::new();
    for name in &wire.missing_fields {
        let kind: SectionKind = name
            .parse()
            .map_err(|e: UnknownSection| ReportError::MalformedDocument(e.to_string()))?;
        missing_fields.insert(kind);
    }
    let report = StructuredReport {
        title: wire.title,
        steps_to_reproduce: wire.steps_to_reproduce,
        expected_result: wire.expected_result,
        actual_result: wire.actual_result,
        additional_information: wire.additional_information,
        missing_fields,
    };
    report
        .validate()
        .map_err(|e| ReportError::MalformedDocument(e.to_string()))?;
    Ok(report)
}

/// Maps a loosely written section name (JSON key, header text) to a kind.
pub fn section_from_label(label: &str) -> Option<SectionKind> {
    let cleaned = label
        .trim()
        .replace(['_', '-'], " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    if cleaned.eq_ignore_ascii_case("title") || cleaned.eq_ignore_ascii_case("summary") {
        return Some(SectionKind::Title);
    }
    for (kind, re) in HEADER_RES.iter() {
        if let Some(c) = re.captures(&cleaned) {
            if c.name("rest").is_none_or(|m| m.as_str().is_empty()) {
                return Some(*kind);
            }
        }
    }
    None
}
