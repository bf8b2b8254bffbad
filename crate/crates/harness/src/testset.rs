//! Test sets: (unstructured text, gold report) pairs keyed by bug id.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use reportsmith_core::report::{json_to_report, render_report, report_to_json};
use reportsmith_core::StructuredReport;

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub bug_id: u64,
    pub unstructured: String,
    pub gold: StructuredReport,
}

/// Reads a JSONL test set. Each line is either an instruction row
/// (`input`, `output`, optional `provenance.bug_id`) or a plain
/// `{bug_id, unstructured, gold}` record. Rows without an id are numbered
/// by line. The result is sorted by bug id.
pub fn load_testset(path: &Path) -> Result<Vec<TestCase>, HarnessError> {
    let io_err = |e: std::io::Error| HarnessError::Io { path: path.to_owned(), source: e };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut cases = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| HarnessError::Testset(format!("{}:{}: {msg}", path.display(), i + 1));
        let v: Value = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        cases.push(case_from_value(&v, i as u64 + 1).map_err(bad)?);
    }
    cases.sort_by_key(|c| c.bug_id);
    if let Some(w) = cases.windows(2).find(|w| w[0].bug_id == w[1].bug_id) {
        return Err(HarnessError::Testset(format!("duplicate bug_id {}", w[0].bug_id)));
    }
    Ok(cases)
}

fn case_from_value(v: &Value, line_no: u64) -> Result<TestCase, String> {
    let bug_id = v
        .pointer("/provenance/bug_id")
        .or_else(|| v.get("bug_id"))
        .and_then(Value::as_u64)
        .unwrap_or(line_no);
    let unstructured = v
        .get("input")
        .or_else(|| v.get("unstructured"))
        .and_then(Value::as_str)
        .ok_or("missing `input`")?
        .to_owned();
    let gold = match v.get("output").or_else(|| v.get("gold")) {
        Some(Value::String(s)) => json_to_report(s),
        Some(obj @ Value::Object(_)) => json_to_report(&obj.to_string()),
        _ => return Err("missing `output`".into()),
    }
    .map_err(|e| e.to_string())?;
    Ok(TestCase { bug_id, unstructured, gold })
}

pub fn write_testset(cases: &[TestCase], path: &Path) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(File::create(path)?);
    for c in cases {
        let row = json!({
            "instruction": reportsmith_gateway::prompt::INSTRUCTION,
            "input": c.unstructured,
            "output": report_to_json(&c.gold),
            "provenance": {"bug_id": c.bug_id, "embedding_similarity": 1.0, "cosine_tf": 1.0},
        });
        serde_json::to_writer(&mut f, &row)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}

const COMPONENTS: [&str; 10] = [
    "bookmarks menu",
    "download panel",
    "address bar",
    "tab strip",
    "print preview",
    "history sidebar",
    "password manager",
    "reader view",
    "search field",
    "zoom control",
];

const TRIGGERS: [(&str, &str); 5] = [
    ("resizing the window", "Resize the window by dragging its lower corner"),
    ("switching themes", "Switch to the dark theme from the settings page"),
    ("restoring a session", "Restart the browser and restore the previous session"),
    ("pressing the escape key", "Press the Escape key twice"),
    ("opening a private window", "Open a private window with the keyboard shortcut"),
];

const PLATFORMS: [&str; 4] = ["Windows 11", "macOS 14", "Ubuntu 22.04", "Fedora 40"];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Deterministic well-formed gold reports whose unstructured side is the
/// rendered template. Bug ids start at 5001.
pub fn synthetic_testset(n: usize) -> Vec<TestCase> {
    (0..n)
        .map(|i| {
            let comp = COMPONENTS[i % COMPONENTS.len()];
            let (trigger, step) = TRIGGERS[(i / COMPONENTS.len()) % TRIGGERS.len()];
            let platform = PLATFORMS[i % PLATFORMS.len()];
            let gold = StructuredReport {
                title: format!("{} stops responding after {trigger}", capitalize(comp)),
                steps_to_reproduce: vec![
                    "Start the browser with a new profile.".into(),
                    format!("Open the {comp}."),
                    format!("{step}."),
                    format!("Click any entry in the {comp}."),
                ],
                expected_result: format!("The {comp} should react to clicks and show the selected entry."),
                actual_result: format!("Nothing happens and the {comp} freezes until a restart."),
                additional_information: format!("Build 2024{:04}, {platform}. Reproducible every time.", 101 + i),
                missing_fields: Default::default(),
            };
            TestCase { bug_id: 5001 + i as u64, unstructured: render_report(&gold), gold }
        })
        .collect()
}
