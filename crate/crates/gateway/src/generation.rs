//! Turning raw model output into a [`StructuredReport`].

use std::collections::BTreeSet;
use std::time::Duration;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use reportsmith_core::lexicon::BUILTIN_MISSING_PHRASES;
use reportsmith_core::report::{
    json_to_report, normalize_block, section_from_label, split_steps, strip_step_prefix,
};
use reportsmith_core::{SectionKind, StructuredReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed generation: {0}")]
pub struct MalformedGeneration(pub String);

/// Outcome of one generation call. Exactly one of `report` / `parse_error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub raw_text: String,
    pub report: Option<StructuredReport>,
    pub parse_error: Option<String>,
    #[serde(with = "secs")]
    pub latency: Duration,
    pub retry_count: u32,
}

impl GenerationResult {
    pub fn from_raw(raw_text: String, latency: Duration, retry_count: u32) -> Self {
        let (report, parse_error) = match parse_generation(&raw_text) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.0)),
        };
        Self { raw_text, report, parse_error, latency, retry_count }
    }

    pub fn parse_failed(&self) -> bool {
        self.report.is_none()
    }
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

static MISSING_PHRASES: Lazy<Vec<String>> = Lazy::new(|| {
    BUILTIN_MISSING_PHRASES
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
});

/// True when a field value is a placeholder for absent information:
/// empty, a marker phrase on its own, or a marker phrase followed by
/// punctuation or "in/from the ..." ("Not provided in the report.").
pub fn is_missing_phrase(text: &str) -> bool {
    let t = text
        .trim()
        .trim_matches(|c: char| "<>[]()*_\"'`.:- ".contains(c))
        .to_lowercase();
    if t.is_empty() {
        return true;
    }
    MISSING_PHRASES.iter().any(|m| match t.strip_prefix(m.as_str()) {
        None => false,
        Some("") => true,
        Some(rest) => {
            rest.starts_with([':', '.', ',', ';', '(', '-', '!'])
                || [" in the", " from the", " in this", " in report", " -", " ("]
                    .iter()
                    .any(|p| rest.starts_with(p))
        }
    })
}

/// Finds the first balanced `{...}` that parses as a JSON object.
pub fn extract_json_object(raw: &str) -> Option<Map<String, Value>> {
    let bytes = raw.as_bytes();
    let mut start = 0;
    while let Some(off) = raw[start..].find('{') {
        let open = start + off;
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        let mut close = None;
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        if let Some(end) = close {
            if let Ok(Value::Object(map)) = serde_json::from_str(&raw[open..=end]) {
                return Some(map);
            }
        }
        start = open + 1;
    }
    None
}

fn value_lines(v: &Value) -> Vec<String> {
    match v {
        Value::String(s) => vec![s.clone()],
        Value::Array(items) => items.iter().flat_map(value_lines).collect(),
        Value::Number(n) => vec![n.to_string()],
        Value::Bool(b) => vec![b.to_string()],
        Value::Object(map) => map
            .iter()
            .flat_map(|(k, v)| value_lines(v).into_iter().map(move |l| format!("{k}: {l}")))
            .collect(),
        Value::Null => Vec::new(),
    }
}

fn steps_from(v: &Value) -> Vec<String> {
    let steps: Vec<String> = match v {
        Value::Array(items) => items
            .iter()
            .flat_map(value_lines)
            .map(|s| {
                let s = s.trim();
                strip_step_prefix(s).unwrap_or(s).split_whitespace().collect::<Vec<_>>().join(" ")
            })
            .collect(),
        other => split_steps(&value_lines(other).join("\n")),
    };
    steps.into_iter().filter(|s| !is_missing_phrase(s)).collect()
}

fn text_from(v: &Value) -> String {
    let text = normalize_block(&value_lines(v).join("\n"));
    if is_missing_phrase(&text) {
        String::new()
    } else {
        text
    }
}

const MISSING_KEYS: &[&str] = &["missing_fields", "missing", "missing_information", "missing_sections"];

/// Extracts the first JSON object from `raw` (code fences and prose around it
/// are tolerated), maps loosely named keys onto report sections, normalizes
/// placeholder values to empty + flagged, then validates through the strict
/// JSON reader.
pub fn parse_generation(raw: &str) -> Result<StructuredReport, MalformedGeneration> {
    let map = extract_json_object(raw)
        .ok_or_else(|| MalformedGeneration("no JSON object found".into()))?;

    let mut report = StructuredReport::default();
    let mut seen = BTreeSet::new();
    let mut flagged = BTreeSet::new();
    for (key, value) in &map {
        if MISSING_KEYS.iter().any(|k| key.eq_ignore_ascii_case(k)) {
            for label in value_lines(value) {
                if let Some(kind) = section_from_label(&label).filter(|k| k.is_body()) {
                    flagged.insert(kind);
                }
            }
            continue;
        }
        let Some(kind) = section_from_label(key) else { continue };
        if !seen.insert(kind) {
            continue;
        }
        match kind {
            SectionKind::Title => report.title = text_from(value).replace('\n', " "),
            SectionKind::StepsToReproduce => report.steps_to_reproduce = steps_from(value),
            SectionKind::ExpectedResult => report.expected_result = text_from(value),
            SectionKind::ActualResult => report.actual_result = text_from(value),
            SectionKind::AdditionalInformation => report.additional_information = text_from(value),
        }
    }
    if seen.is_empty() {
        return Err(MalformedGeneration("JSON object has no report fields".into()));
    }
    for kind in SectionKind::BODY {
        if flagged.contains(&kind) || report.is_section_empty(kind) {
            report.clear_section(kind);
        }
    }

    let canonical = json!({
        "title": report.title,
        "steps_to_reproduce": report.steps_to_reproduce,
        "expected_result": report.expected_result,
        "actual_result": report.actual_result,
        "additional_information": report.additional_information,
        "missing_fields": report.missing_fields,
    });
    json_to_report(&canonical.to_string()).map_err(|e| MalformedGeneration(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use reportsmith_core::report::report_to_json;

    fn sample() -> StructuredReport {
        StructuredReport {
            title: "Save button does nothing".into(),
            steps_to_reproduce: vec!["Open the editor.".into(), "Click Save.".into()],
            expected_result: "The file is saved.".into(),
            actual_result: "Nothing happens.".into(),
            additional_information: "Firefox 120 on Linux.".into(),
            missing_fields: BTreeSet::new(),
        }
    }

    #[test]
    fn bare_json() {
        assert_eq!(parse_generation(&report_to_json(&sample())).unwrap(), sample());
    }

    #[test]
    fn fenced_json_with_prose() {
        let raw = format!("Here is the report:\n```json\n{}\n```\nLet me know!", report_to_json(&sample()));
        assert_eq!(parse_generation(&raw).unwrap(), sample());
    }

    #[test]
    fn refusal_is_malformed() {
        assert!(parse_generation("I cannot help").is_err());
        assert!(parse_generation("{not json}").is_err());
        assert!(parse_generation(r#"{"foo": 1}"#).is_err());
    }

    #[test]
    fn skips_braces_in_prose() {
        let raw = format!("Use {{placeholders}} like {{x}}. {}", report_to_json(&sample()));
        assert_eq!(parse_generation(&raw).unwrap(), sample());
    }

    #[test]
    fn lenient_keys_and_placeholders() {
        let raw = r#"{
            "Title": "Crash on start",
            "Steps to Reproduce (S2R)": ["1. Launch the app", "2. Wait"],
            "Expected Result (ER)": "Not provided in the report.",
            "Actual Result (AR)": "The app crashes.",
            "Additional Information": "N/A",
            "missing_fields": ["Expected Result"]
        }"#;
        let r = parse_generation(raw).unwrap();
        assert_eq!(r.steps_to_reproduce, ["Launch the app", "Wait"]);
        assert_eq!(r.expected_result, "");
        assert_eq!(r.additional_information, "");
        assert_eq!(
            r.missing_fields,
            BTreeSet::from([SectionKind::ExpectedResult, SectionKind::AdditionalInformation])
        );
    }

    #[test]
    fn flagged_section_is_cleared() {
        let raw = r#"{"title":"t","steps_to_reproduce":"1. a\n2. b","expected_result":"x","actual_result":"y","additional_information":"z","missing_fields":["additional_information"]}"#;
        let r = parse_generation(raw).unwrap();
        assert_eq!(r.steps_to_reproduce, ["a", "b"]);
        assert_eq!(r.additional_information, "");
        assert!(r.missing_fields.contains(&SectionKind::AdditionalInformation));
    }

    #[test]
    fn missing_phrase_rules() {
        for yes in ["", "Not provided", "not provided.", "N/A", "Missing", "<MISSING>", "Not specified in the report", "Unknown"] {
            assert!(is_missing_phrase(yes), "{yes:?}");
        }
        for no in ["Missing toolbar icon after update", "Unknown version string shown", "Nothing happens."] {
            assert!(!is_missing_phrase(no), "{no:?}");
        }
    }

    #[test]
    fn result_holds_exactly_one_outcome() {
        let ok = GenerationResult::from_raw(report_to_json(&sample()), Duration::ZERO, 0);
        assert!(ok.report.is_some() && ok.parse_error.is_none());
        let bad = GenerationResult::from_raw("nope".into(), Duration::ZERO, 0);
        assert!(bad.report.is_none() && bad.parse_error.is_some());
        assert!(bad.parse_failed());
    }
}
