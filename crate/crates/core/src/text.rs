//! Shared tokenizer and sentence splitter.
//!
//! Every metric and every CTQRS rule counts tokens and sentences through this
//! module, so a single definition governs all of them.

use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Ordered lowercase word tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        debug_assert!(tokens
            .iter()
            .all(|t| !t.is_empty() && !t.chars().any(char::is_whitespace)));
        Self(tokens)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    /// Space-joined form; re-tokenizing it yields the same sequence.
    pub fn joined(&self) -> String {
        self.0.join(" ")
    }
}

impl<'a> IntoIterator for &'a TokenSequence {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl From<Vec<&str>> for TokenSequence {
    fn from(v: Vec<&str>) -> Self {
        Self::new(v.into_iter().map(str::to_owned).collect())
    }
}

/// Lowercases and splits on every non-alphanumeric character.
///
/// Letter/digit runs stay together, so `"2x"` is one token.
pub fn tokenize(text: &str) -> TokenSequence {
    let tokens = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(str::to_lowercase)
        .collect();
    TokenSequence(tokens)
}

/// Number of tokens `tokenize` would produce, without allocating them.
pub fn token_count(text: &str) -> usize {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .count()
}

/// Byte ranges of the sentences in `text`.
///
/// A sentence ends at a run of `.`, `!` or `?` followed by whitespace or end
/// of input, and at every line break. A leading list marker such as `"1."`
/// does not end a sentence. Ranges are trimmed, non-empty and in order.
pub fn sentence_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut line_start = 0;
    for line in text.split_inclusive('\n') {
        let content_len = line.trim_end_matches(['\n', '\r']).len();
        split_line(text, line_start, line_start + content_len, &mut spans);
        line_start += line.len();
    }
    spans
}

fn split_line(text: &str, start: usize, end: usize, out: &mut Vec<Range<usize>>) {
    let line = &text[start..end];
    let mut seg_start = 0;
    let mut chars = line.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut run_end = i + c.len_utf8();
        while let Some(&(j, d)) = chars.peek() {
            if matches!(d, '.' | '!' | '?') {
                run_end = j + d.len_utf8();
                chars.next();
            } else {
                break;
            }
        }
        let at_boundary = match line[run_end..].chars().next() {
            None => true,
            Some(next) => next.is_whitespace(),
        };
        if !at_boundary {
            continue;
        }
        let before = line[seg_start..i].trim();
        if is_list_marker(before) {
            continue;
        }
        push_trimmed(text, start + seg_start, start + run_end, out);
        seg_start = run_end;
    }
    push_trimmed(text, start + seg_start, end, out);
}

fn is_list_marker(s: &str) -> bool {
    !s.is_empty() && s.len() <= 3 && s.bytes().all(|b| b.is_ascii_digit())
}

fn push_trimmed(text: &str, start: usize, end: usize, out: &mut Vec<Range<usize>>) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if !trimmed.is_empty() {
        let s = start + lead;
        out.push(s..s + trimmed.len());
    }
}

/// Sentence texts, see [`sentence_spans`].
pub fn sentences(text: &str) -> Vec<&str> {
    sentence_spans(text).into_iter().map(|r| &text[r]).collect()
}
