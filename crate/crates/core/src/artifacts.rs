//! Stack-trace and code-snippet detection.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

/// Minimum run of consecutive frame or indented lines that counts as an artifact.
pub const MIN_BLOCK_LINES: usize = 3;

/// Average code punctuation hits per line an indented block needs.
pub const CODE_DENSITY_THRESHOLD: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    StackTrace,
    CodeSnippet,
}

/// Byte range `[start, end)` of an artifact inside the scanned body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactSpan {
    pub kind: ArtifactKind,
    pub start: usize,
    pub end: usize,
}

static FRAME_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"^\s*(?:at\s+[\w$.<>/:\[\]-]+\s*\(.*\)\s*$|#\d+\s+0x[0-9a-fA-F]+\b)",
    )
    .expect("static regex")
});

struct Line<'a> {
    start: usize,
    end: usize,
    text: &'a str,
}

fn lines_with_offsets(body: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for raw in body.split_inclusive('\n') {
        let text = raw.trim_end_matches(['\n', '\r']);
        out.push(Line { start: offset, end: offset + text.len(), text });
        offset += raw.len();
    }
    out
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn is_indented(line: &str) -> bool {
    line.starts_with('\t') || line.starts_with("    ")
}

fn code_punctuation(line: &str) -> usize {
    let pairs = line.matches("()").count();
    let singles = line
        .chars()
        .filter(|c| matches!(c, ';' | '{' | '}' | '='))
        .count();
    pairs + singles
}

/// Finds stack traces and code blocks. Spans are sorted and disjoint.
pub fn detect_artifacts(body: &str) -> Vec<ArtifactSpan> {
    let lines = lines_with_offsets(body);
    let mut claimed = vec![false; lines.len()];
    let mut spans = Vec::new();

    // Fenced blocks; an unclosed fence runs to the end of the body.
    let mut i = 0;
    while i < lines.len() {
        if is_fence(lines[i].text) {
            let close = (i + 1..lines.len()).find(|&j| is_fence(lines[j].text));
            let last = close.unwrap_or(lines.len() - 1);
            claimed[i..=last].iter_mut().for_each(|c| *c = true);
            spans.push(ArtifactSpan {
                kind: ArtifactKind::CodeSnippet,
                start: lines[i].start,
                end: lines[last].end,
            });
            i = last + 1;
        } else {
            i += 1;
        }
    }

    let runs = |kind: ArtifactKind, spans: &mut Vec<ArtifactSpan>, claimed: &mut Vec<bool>| {
        let mut i = 0;
        while i < lines.len() {
            let belongs = |j: usize| {
                !claimed[j]
                    && match kind {
                        ArtifactKind::StackTrace => FRAME_RE.is_match(lines[j].text),
                        ArtifactKind::CodeSnippet => {
                            is_indented(lines[j].text) && !lines[j].text.trim().is_empty()
                        }
                    }
            };
            if !belongs(i) {
                i += 1;
                continue;
            }
            let mut j = i;
            while j + 1 < lines.len() && belongs(j + 1) {
                j += 1;
            }
            let count = j - i + 1;
            let accept = count >= MIN_BLOCK_LINES
                && match kind {
                    ArtifactKind::StackTrace => true,
                    ArtifactKind::CodeSnippet => {
                        let hits: usize = lines[i..=j].iter().map(|l| code_punctuation(l.text)).sum();
                        hits as f64 / count as f64 >= CODE_DENSITY_THRESHOLD
                    }
                };
            if accept {
                claimed[i..=j].iter_mut().for_each(|c| *c = true);
                spans.push(ArtifactSpan { kind, start: lines[i].start, end: lines[j].end });
            }
            i = j + 1;
        }
    };
    runs(ArtifactKind::StackTrace, &mut spans, &mut claimed);
    runs(ArtifactKind::CodeSnippet, &mut spans, &mut claimed);

    spans.retain(|s| s.start < s.end);
    spans.sort_by_key(|s| s.start);
    spans
}
