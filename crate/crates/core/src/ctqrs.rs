//! CTQRS: a 13-rule, 17-point bug-report quality score.
//!
//! | rule | points | check |
//! |------|--------|-------|
//! | M1   | 1 | body word count in [10, 500] |
//! | M2   | 1 | mean sentence length <= 30 tokens |
//! | M3   | 1 | >= 90% sentences terminally punctuated, no run of 3 identical marks |
//! | M4   | 1 | no sentence over 60 tokens |
//! | RL1  | 2 | steps to reproduce present |
//! | RL2  | 1 | at least two itemized steps |
//! | RL3  | 1 | expected result present |
//! | RL4  | 1 | actual result present |
//! | RL5  | 2 | environment evidence: 1 for one pattern family, 2 for two or more |
//! | A1   | 2 | steps opening with an action verb: >= 50% for 1, >= 80% for 2 |
//! | A2   | 1 | a UI element named in the steps |
//! | A3   | 2 | defect term in the actual result; 2 if it also names a UI/artifact noun |
//! | A4   | 1 | expected/actual token Jaccard <= 0.8, both non-empty |

use std::fmt;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::lexicon::{stems_of, Lexicons};
use crate::report::{SectionKind, StructuredReport};
use crate::text::{sentences, token_count, tokenize};

pub const RULE_TABLE_VERSION: &str = "rule_table_v1";
pub const MAX_TOTAL: u32 = 17;

/// Strict acceptance bar used when curating training data (`total > 14`).
pub const QUALITY_BAR: u32 = 14;

pub const MIN_WORDS: usize = 10;
pub const MAX_WORDS: usize = 500;
pub const MAX_MEAN_SENTENCE_TOKENS: f64 = 30.0;
pub const MIN_PUNCTUATED_FRACTION: f64 = 0.9;
pub const MAX_SENTENCE_TOKENS: usize = 60;
pub const MAX_ER_AR_JACCARD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    M1,
    M2,
    M3,
    M4,
    RL1,
    RL2,
    RL3,
    RL4,
    RL5,
    A1,
    A2,
    A3,
    A4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Morphological,
    Relational,
    Analytical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityProperty {
    Understandability,
    Conciseness,
    Completeness,
    Atomicity,
    Reproducibility,
}

impl RuleId {
    pub const ALL: [RuleId; 13] = [
        RuleId::M1,
        RuleId::M2,
        RuleId::M3,
        RuleId::M4,
        RuleId::RL1,
        RuleId::RL2,
        RuleId::RL3,
        RuleId::RL4,
        RuleId::RL5,
        RuleId::A1,
        RuleId::A2,
        RuleId::A3,
        RuleId::A4,
    ];

    pub fn max_points(self) -> u32 {
        match self {
            RuleId::RL1 | RuleId::RL5 | RuleId::A1 | RuleId::A3 => 2,
            _ => 1,
        }
    }

    pub fn indicator(self) -> Indicator {
        match self {
            RuleId::M1 | RuleId::M2 | RuleId::M3 | RuleId::M4 => Indicator::Morphological,
            RuleId::RL1 | RuleId::RL2 | RuleId::RL3 | RuleId::RL4 | RuleId::RL5 => {
                Indicator::Relational
            }
            RuleId::A1 | RuleId::A2 | RuleId::A3 | RuleId::A4 => Indicator::Analytical,
        }
    }

    pub fn property(self) -> QualityProperty {
        match self {
            RuleId::M1 | RuleId::M4 => QualityProperty::Conciseness,
            RuleId::M2 | RuleId::M3 => QualityProperty::Understandability,
            RuleId::RL2 => QualityProperty::Atomicity,
            RuleId::RL1 | RuleId::RL3 | RuleId::RL4 | RuleId::RL5 => QualityProperty::Completeness,
            RuleId::A1 | RuleId::A2 | RuleId::A3 | RuleId::A4 => QualityProperty::Reproducibility,
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleResult {
    pub rule: RuleId,
    #[serde(rename = "points")]
    pub points_awarded: u32,
    #[serde(rename = "max")]
    pub points_max: u32,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtqrsBreakdown {
    pub total: u32,
    pub max_total: u32,
    #[serde(rename = "rules")]
    pub results: Vec<RuleResult>,
    pub rule_table: String,
}

impl CtqrsBreakdown {
    fn from_results(results: Vec<RuleResult>) -> Self {
        let total = results.iter().map(|r| r.points_awarded).sum();
        Self { total, max_total: MAX_TOTAL, results, rule_table: RULE_TABLE_VERSION.to_owned() }
    }

    pub fn points(&self, rule: RuleId) -> u32 {
        self.results
            .iter()
            .find(|r| r.rule == rule)
            .map_or(0, |r| r.points_awarded)
    }

    /// `total / 17` at full precision.
    pub fn percent(&self) -> f64 {
        score_percent(self)
    }

    /// Canonical compact JSON. Both the CLI and the HTTP service emit this.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("breakdown serialization is infallible")
    }
}

pub fn score_percent(breakdown: &CtqrsBreakdown) -> f64 {
    f64::from(breakdown.total) / f64::from(MAX_TOTAL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentPattern {
    Version,
    Build,
    OperatingSystem,
    UserAgent,
    Attachment,
}

static ENV_PATTERNS: Lazy<Vec<(EnvironmentPattern, Regex)>> = Lazy::new(|| {
    let table = [
        (
            EnvironmentPattern::Version,
            r"(?i)\b(?:version|ver\.?)\s*:?\s*v?\d+(?:\.\d+)*|\bv\d+\.\d+|\brv:\d+(?:\.\d+)*|\b\d+\.\d+\.\d+",
        ),
        (
            EnvironmentPattern::Build,
            r"(?i)\bbuild\s*(?:id|number|no\.?|#)?\s*:?\s*#?\d{4,}|\bbuildid\b|\bbuild\s*(?:id|number)\b",
        ),
        (
            EnvironmentPattern::OperatingSystem,
            r"(?i)\b(?:windows(?:\s+\d+)?|win(?:32|64)|linux|ubuntu|debian|fedora|arch\s+linux|mac\s*os(?:\s*x)?|os\s*x|android|ios|chrome\s*os|freebsd|x11|os/2)\b",
        ),
        (EnvironmentPattern::UserAgent, r"(?i)\buser[-\s]?agent\b|\bmozilla/\d"),
        (
            EnvironmentPattern::Attachment,
            r"(?i)\bscreen\s*shots?\b|\battach(?:ed|ment|ments)\b|\.(?:png|jpe?g|gif|bmp|webp)\b",
        ),
    ];
    table
        .into_iter()
        .map(|(kind, re)| (kind, Regex::new(re).expect("environment regex")))
        .collect()
});

/// Distinct environment pattern families present in `text`.
pub fn environment_patterns(text: &str) -> Vec<EnvironmentPattern> {
    ENV_PATTERNS
        .iter()
        .filter(|(_, re)| re.is_match(text))
        .map(|(kind, _)| *kind)
        .collect()
}

static PUNCT_RUN_RE: Lazy<Regex> = Lazy::new(|| {
    let marks = ['.', '!', '?', ',', ';', ':', '-', '*', '#', '~', '='];
    let alts: Vec<String> = marks
        .iter()
        .map(|m| format!("{}{{3,}}", regex::escape(&m.to_string())))
        .collect();
    Regex::new(&alts.join("|")).expect("punctuation regex")
});

fn ends_with_terminal(sentence: &str) -> bool {
    sentence
        .trim_end_matches(['"', '\'', ')', ']', '»', '”', '’'])
        .ends_with(['.', '!', '?'])
}

fn jaccard(a: &str, b: &str) -> f64 {
    use std::collections::BTreeSet;
    let sa: BTreeSet<String> = tokenize(a).into_inner().into_iter().collect();
    let sb: BTreeSet<String> = tokenize(b).into_inner().into_iter().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 0.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

/// Rule engine bound to a set of lexicons. Immutable and `Sync`.
#[derive(Debug, Clone, Default)]
pub struct CtqrsEngine {
    lexicons: Lexicons,
}

static DEFAULT_ENGINE: Lazy<CtqrsEngine> = Lazy::new(CtqrsEngine::default);

/// Scores with the built-in lexicons.
pub fn score(report: &StructuredReport) -> CtqrsBreakdown {
    DEFAULT_ENGINE.score(report)
}

/// Scores a batch; runs in parallel under the `parallel` feature.
pub fn score_many(reports: &[StructuredReport]) -> Vec<CtqrsBreakdown> {
    crate::par::map(reports, score)
}

impl CtqrsEngine {
    pub fn new(lexicons: Lexicons) -> Self {
        Self { lexicons }
    }

    pub fn lexicons(&self) -> &Lexicons {
        &self.lexicons
    }

    pub fn score(&self, report: &StructuredReport) -> CtqrsBreakdown {
        let body = report.body_text();
        let sents: Vec<(usize, &str)> = sentences(&body)
            .into_iter()
            .map(|s| (token_count(s), s))
            .filter(|(n, _)| *n > 0)
            .collect();

        let mut results = Vec::with_capacity(13);
        let mut push = |rule: RuleId, points: u32, evidence: String| {
            debug_assert!(points <= rule.max_points());
            results.push(RuleResult { rule, points_awarded: points, points_max: rule.max_points(), evidence });
        };

        // Morphological
        let words = token_count(&body);
        push(
            RuleId::M1,
            u32::from((MIN_WORDS..=MAX_WORDS).contains(&words)),
            format!("{words} words"),
        );

        if sents.is_empty() {
            push(RuleId::M2, 0, "no sentences".into());
            push(RuleId::M3, 0, "no sentences".into());
            push(RuleId::M4, 0, "no sentences".into());
        } else {
            let total_tokens: usize = sents.iter().map(|(n, _)| n).sum();
            let mean = total_tokens as f64 / sents.len() as f64;
            push(
                RuleId::M2,
                u32::from(mean <= MAX_MEAN_SENTENCE_TOKENS),
                format!("mean {mean:.1} tokens per sentence"),
            );

            let punctuated = sents.iter().filter(|(_, s)| ends_with_terminal(s)).count();
            let fraction = punctuated as f64 / sents.len() as f64;
            let run = PUNCT_RUN_RE.find(&body).map(|m| m.as_str().to_owned());
            let ok = fraction >= MIN_PUNCTUATED_FRACTION && run.is_none();
            let evidence = match run {
                Some(r) => format!("{punctuated}/{} punctuated; run `{r}`", sents.len()),
                None => format!("{punctuated}/{} punctuated", sents.len()),
            };
            push(RuleId::M3, u32::from(ok), evidence);

            let longest = sents.iter().map(|(n, _)| *n).max().unwrap_or(0);
            push(
                RuleId::M4,
                u32::from(longest <= MAX_SENTENCE_TOKENS),
                format!("longest sentence {longest} tokens"),
            );
        }

        // Relational
        let steps = &report.steps_to_reproduce;
        let has_steps = !report.is_section_empty(SectionKind::StepsToReproduce);
        push(
            RuleId::RL1,
            if has_steps { 2 } else { 0 },
            if has_steps { format!("{} step(s)", steps.len()) } else { "no steps".into() },
        );
        push(
            RuleId::RL2,
            u32::from(steps.len() >= 2),
            format!("{} itemized step(s)", steps.len()),
        );
        let has_er = !report.is_section_empty(SectionKind::ExpectedResult);
        push(RuleId::RL3, u32::from(has_er), if has_er { "present".into() } else { "absent".into() });
        let has_ar = !report.is_section_empty(SectionKind::ActualResult);
        push(RuleId::RL4, u32::from(has_ar), if has_ar { "present".into() } else { "absent".into() });

        let env = environment_patterns(&body);
        let env_points = env.len().min(2) as u32;
        let env_names: Vec<&str> = env
            .iter()
            .map(|p| match p {
                EnvironmentPattern::Version => "version",
                EnvironmentPattern::Build => "build",
                EnvironmentPattern::OperatingSystem => "os",
                EnvironmentPattern::UserAgent => "user_agent",
                EnvironmentPattern::Attachment => "attachment",
            })
            .collect();
        push(
            RuleId::RL5,
            env_points,
            if env_names.is_empty() { "no environment details".into() } else { env_names.join(",") },
        );

        // Analytical
        let lex = &self.lexicons;
        let step_stems: Vec<Vec<String>> = steps.iter().map(|s| stems_of(s)).collect();
        let actionable = step_stems
            .iter()
            .filter(|st| lex.action_verbs.starts(st).is_some())
            .count();
        let action_fraction = if steps.is_empty() { 0.0 } else { actionable as f64 / steps.len() as f64 };
        let a1 = if steps.is_empty() {
            0
        } else if action_fraction >= 0.8 {
            2
        } else if action_fraction >= 0.5 {
            1
        } else {
            0
        };
        push(RuleId::A1, a1, format!("{actionable}/{} steps open with an action", steps.len()));

        let ui_hit = step_stems.iter().find_map(|st| lex.ui_nouns.find_in(st));
        push(
            RuleId::A2,
            u32::from(ui_hit.is_some()),
            ui_hit.map_or_else(|| "no interface element".into(), |t| format!("mentions `{t}`")),
        );

        let ar_stems = stems_of(&report.actual_result);
        let a3 = match lex.defect_terms.find_in(&ar_stems) {
            None => (0, "no defect statement".to_owned()),
            Some(defect) => match lex
                .ui_nouns
                .find_in(&ar_stems)
                .or_else(|| lex.artifact_nouns.find_in(&ar_stems))
            {
                Some(noun) => (2, format!("`{defect}` with `{noun}`")),
                None => (1, format!("`{defect}`")),
            },
        };
        push(RuleId::A3, a3.0, a3.1);

        let a4 = if has_er && has_ar {
            let j = jaccard(&report.expected_result, &report.actual_result);
            (u32::from(j <= MAX_ER_AR_JACCARD), format!("jaccard {j:.2}"))
        } else {
            (0, "expected or actual result missing".to_owned())
        };
        push(RuleId::A4, a4.0, a4.1);

        CtqrsBreakdown::from_results(results)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{golden_g1, PRINT_PREVIEW};
    use crate::report::parse_sections;

    #[test]
    fn golden_g1_scores_full_marks() {
        let b = score(&golden_g1());
        for r in &b.results {
            assert_eq!(r.points_awarded, r.points_max, "{:?}: {}", r.rule, r.evidence);
        }
        assert_eq!(b.total, 17);
    }

    #[test]
    fn empty_report_scores_zero() {
        let b = score(&StructuredReport::all_missing());
        assert_eq!(b.total, 0);
        assert_eq!(score(&StructuredReport::default()).total, 0);
    }

    #[test]
    fn print_preview_meets_quality_bar() {
        let b = score(&parse_sections(PRINT_PREVIEW));
        assert!(b.total >= 14, "{b:#?}");
    }

    #[test]
    fn table_shape() {
        assert_eq!(RuleId::ALL.len(), 13);
        assert_eq!(RuleId::ALL.iter().map(|r| r.max_points()).sum::<u32>(), MAX_TOTAL);
        let b = score(&golden_g1());
        assert_eq!(b.results.iter().map(|r| r.rule).collect::<Vec<_>>(), RuleId::ALL);
    }

    #[test]
    fn percent_values() {
        let mut b = score(&golden_g1());
        assert_eq!(b.percent(), 1.0);
        b.total = 13;
        assert!((score_percent(&b) - 0.7647).abs() < 5e-5);
        b.total = 0;
        assert_eq!(score_percent(&b), 0.0);
    }

    #[test]
    fn relational_only_report_scores_four() {
        let filler = |w: &str| vec![w; 200].join(" ");
        let r = StructuredReport {
            title: String::new(),
            steps_to_reproduce: vec![filler("zebra")],
            expected_result: filler("quux"),
            actual_result: filler("quux"),
            additional_information: String::new(),
            missing_fields: [SectionKind::AdditionalInformation].into(),
        };
        let b = score(&r);
        assert_eq!(b.total, 4, "{b:#?}");
        for rule in [RuleId::RL1, RuleId::RL3, RuleId::RL4] {
            assert_eq!(b.points(rule), rule.max_points());
        }
    }

    #[test]
    fn punctuation_runs_fail_m3() {
        let mut r = golden_g1();
        r.actual_result.push_str(" Why!!!");
        assert_eq!(score(&r).points(RuleId::M3), 0);
    }

    #[test]
    fn a3_partial_credit_without_noun() {
        let mut r = golden_g1();
        r.actual_result = "Nothing happens and it is wrong.".into();
        assert_eq!(score(&r).points(RuleId::A3), 1);
    }

    #[test]
    fn environment_pattern_families() {
        assert!(environment_patterns("nothing here").is_empty());
        assert_eq!(environment_patterns("Windows 11"), vec![EnvironmentPattern::OperatingSystem]);
        assert_eq!(environment_patterns("see screenshot.png").len(), 1);
        assert_eq!(
            environment_patterns("Build Number: 2002040916, Firefox 108.0.1"),
            vec![EnvironmentPattern::Version, EnvironmentPattern::Build]
        );
    }

    #[test]
    fn breakdown_json_shape() {
        let v: serde_json::Value = serde_json::from_str(&score(&golden_g1()).to_json()).unwrap();
        assert_eq!(v["total"], 17);
        assert_eq!(v["max_total"], 17);
        assert_eq!(v["rule_table"], RULE_TABLE_VERSION);
        assert_eq!(v["rules"][0]["rule"], "M1");
        assert!(v["rules"][0]["points"].is_u64());
        assert!(v["rules"][0]["max"].is_u64());
        assert!(v["rules"][0]["evidence"].is_string());
    }
}

