//! Structural and quality filter applied to fetched bugs.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use reportsmith_core::ctqrs::{CtqrsEngine, QUALITY_BAR};
use reportsmith_core::{detect_artifacts, parse_sections, SectionKind, StructuredReport};

use crate::bugzilla::BugzillaBug;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectionReason {
    MissingSection(SectionKind),
    CodeArtifacts,
    LowCtqrs(u32),
}

impl RejectionReason {
    /// Counter key, without the per-instance argument.
    pub fn category(&self) -> &'static str {
        match self {
            Self::MissingSection(_) => "missing_section",
            Self::CodeArtifacts => "code_artifacts",
            Self::LowCtqrs(_) => "low_ctqrs",
        }
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingSection(k) => write!(f, "missing_section({k})"),
            Self::CodeArtifacts => f.write_str("code_artifacts"),
            Self::LowCtqrs(t) => write!(f, "low_ctqrs({t})"),
        }
    }
}

impl FromStr for RejectionReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "code_artifacts" {
            return Ok(Self::CodeArtifacts);
        }
        let arg = |prefix: &str| s.strip_prefix(prefix).and_then(|r| r.strip_suffix(')'));
        if let Some(kind) = arg("missing_section(") {
            return kind.parse().map(Self::MissingSection).map_err(|e| format!("{e:?}"));
        }
        if let Some(total) = arg("low_ctqrs(") {
            return total.parse().map(Self::LowCtqrs).map_err(|e| format!("{e}"));
        }
        Err(format!("unknown rejection reason `{s}`"))
    }
}

impl Serialize for RejectionReason {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RejectionReason {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub bug_id: u64,
    pub accepted: bool,
    pub rejection_reason: Option<RejectionReason>,
}

/// The structured form of a bug: sections parsed from the description,
/// title taken from the bug summary when the description has none.
pub fn structure_bug(bug: &BugzillaBug) -> StructuredReport {
    let mut report = parse_sections(bug.description());
    if report.title.is_empty() {
        if let Some(summary) = bug.summary() {
            report.title = summary.split_whitespace().collect::<Vec<_>>().join(" ");
        }
    }
    report
}

/// Checks, in order: all four body sections present, no code or stack
/// traces, CTQRS total above the quality bar.
pub fn filter_report_with(engine: &CtqrsEngine, bug: &BugzillaBug) -> (FilterOutcome, StructuredReport) {
    let report = structure_bug(bug);
    let reason = if let Some(kind) = SectionKind::BODY.into_iter().find(|k| report.is_section_empty(*k)) {
        Some(RejectionReason::MissingSection(kind))
    } else if !detect_artifacts(bug.description()).is_empty() {
        Some(RejectionReason::CodeArtifacts)
    } else {
        let total = engine.score(&report).total;
        (total <= QUALITY_BAR).then_some(RejectionReason::LowCtqrs(total))
    };
    let outcome = FilterOutcome { bug_id: bug.bug_id, accepted: reason.is_none(), rejection_reason: reason };
    (outcome, report)
}

pub fn filter_report(bug: &BugzillaBug) -> FilterOutcome {
    filter_report_with(&CtqrsEngine::default(), bug).0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredRecord {
    pub bug_id: u64,
    pub report: StructuredReport,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub fetched: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
}

impl FilterStats {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }

    /// fetched = accepted + all rejections
    pub fn is_conserved(&self) -> bool {
        self.fetched == self.accepted + self.rejected_total()
    }
}

#[derive(Debug, Clone, Default)]
pub struct FilterRun {
    pub accepted: Vec<FilteredRecord>,
    pub outcomes: Vec<FilterOutcome>,
    pub stats: FilterStats,
}

pub fn filter_corpus(engine: &CtqrsEngine, bugs: &[BugzillaBug]) -> FilterRun {
    let mut run = FilterRun::default();
    for key in ["missing_section", "code_artifacts", "low_ctqrs"] {
        run.stats.rejected.insert(key.to_owned(), 0);
    }
    for bug in bugs {
        let (outcome, report) = filter_report_with(engine, bug);
        run.stats.fetched += 1;
        match outcome.rejection_reason {
            None => {
                run.stats.accepted += 1;
                run.accepted.push(FilteredRecord { bug_id: bug.bug_id, report });
            }
            Some(r) => *run.stats.rejected.entry(r.category().to_owned()).or_default() += 1,
        }
        run.outcomes.push(outcome);
    }
    run
}

/// `bug_id,reason` for every rejected bug, in input order.
pub fn write_rejections_csv(outcomes: &[FilterOutcome], path: &Path) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bug_id", "reason"])?;
    for o in outcomes {
        if let Some(r) = &o.rejection_reason {
            w.write_record([o.bug_id.to_string(), r.to_string()])?;
        }
    }
    w.flush()
}
