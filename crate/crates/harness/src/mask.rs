//! Section masking: delete the sentences of an unstructured report that
//! carry one gold section's content.

use std::ops::Range;

use thiserror::Error;

use reportsmith_core::text::sentence_spans;
use reportsmith_core::{rouge1, tokenize, SectionKind, StructuredReport, TokenSequence};

/// Sections the detection experiment masks.
pub const MASKABLE: [SectionKind; 3] =
    [SectionKind::StepsToReproduce, SectionKind::ExpectedResult, SectionKind::ActualResult];

/// A sentence aligns with a section when this share of its tokens is found
/// in the section (ROUGE-1 recall with the sentence as reference).
pub const DEFAULT_ALIGNMENT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("no sentence aligns with {0}")]
    NothingToMask(SectionKind),
    #[error("{0} is not a maskable section")]
    NotMaskable(SectionKind),
}

/// Share of `sentence` tokens covered by `section`.
pub fn alignment(sentence: &TokenSequence, section: &TokenSequence) -> f64 {
    rouge1(section, sentence).recall
}

pub fn mask_section(unstructured: &str, gold: &StructuredReport, kind: SectionKind) -> Result<String, MaskError> {
    mask_section_with(unstructured, gold, kind, DEFAULT_ALIGNMENT_THRESHOLD)
}

/// Removes every sentence whose alignment with the gold `kind` section
/// exceeds `threshold` and is at least its alignment with any other gold
/// section (title included). Lines left blank by a deletion are dropped.
pub fn mask_section_with(
    unstructured: &str,
    gold: &StructuredReport,
    kind: SectionKind,
    threshold: f64,
) -> Result<String, MaskError> {
    if !MASKABLE.contains(&kind) {
        return Err(MaskError::NotMaskable(kind));
    }
    if gold.is_section_empty(kind) {
        return Err(MaskError::NothingToMask(kind));
    }
    let target = tokenize(&gold.section_text(kind));
    let others: Vec<TokenSequence> = SectionKind::ALL
        .into_iter()
        .filter(|k| *k != kind && !gold.is_section_empty(*k))
        .map(|k| tokenize(&gold.section_text(k)))
        .collect();

    let doomed: Vec<Range<usize>> = sentence_spans(unstructured)
        .into_iter()
        .filter(|span| {
            let toks = tokenize(&unstructured[span.clone()]);
            if toks.is_empty() {
                return false;
            }
            let a = alignment(&toks, &target);
            a > threshold && others.iter().all(|o| alignment(&toks, o) <= a)
        })
        .collect();
    if doomed.is_empty() {
        return Err(MaskError::NothingToMask(kind));
    }
    Ok(delete_spans(unstructured, &doomed))
}

fn delete_spans(text: &str, spans: &[Range<usize>]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut line_start = 0;
    for line in text.split_inclusive('\n') {
        let line_end = line_start + line.len();
        let hits: Vec<&Range<usize>> =
            spans.iter().filter(|s| s.start >= line_start && s.end <= line_end).collect();
        if hits.is_empty() {
            out.push_str(line);
        } else {
            let mut kept = String::new();
            let mut at = line_start;
            for s in hits {
                kept.push_str(&text[at..s.start]);
                at = s.end;
            }
            kept.push_str(&text[at..line_end]);
            let body = kept.trim_end_matches(['\n', '\r']);
            if !body.trim().is_empty() {
                out.push_str(&body.split_whitespace().collect::<Vec<_>>().join(" "));
                if line.ends_with('\n') {
                    out.push('\n');
                }
            }
        }
        line_start = line_end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deletes_within_line_and_drops_blank_lines() {
        let text = "Keep this. Drop that.\nDrop that.\nTail\n";
        let spans: Vec<_> = sentence_spans(text).into_iter().filter(|s| &text[s.clone()] == "Drop that.").collect();
        assert_eq!(delete_spans(text, &spans), "Keep this.\nTail\n");
    }

    #[test]
    fn additional_information_is_not_maskable() {
        let gold = reportsmith_core::fixtures::golden_g1();
        assert_eq!(
            mask_section("x", &gold, SectionKind::AdditionalInformation),
            Err(MaskError::NotMaskable(SectionKind::AdditionalInformation))
        );
    }
}
