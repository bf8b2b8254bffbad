//! The three evaluation suites and their per-row results.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use reportsmith_core::ctqrs::CtqrsEngine;
use reportsmith_core::metrics::{EmbeddingProvider, MetricReport, ProviderError};
use reportsmith_core::{meteor, par, render_report, rouge1, tokenize, SectionKind, StructuredReport};
use reportsmith_gateway::prompt::{build_alpaca_messages, build_fewshot_messages, sample_shots, Shot};
use reportsmith_gateway::{generate, ChatBackend, ChatMessage};

use crate::mask::{mask_section, MaskError, MASKABLE};
use crate::testset::TestCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Generation,
    Missing,
    Mapping,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Generation => "generation",
            Suite::Missing => "missing",
            Suite::Mapping => "mapping",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "generation" => Ok(Suite::Generation),
            "missing" => Ok(Suite::Missing),
            "mapping" => Ok(Suite::Mapping),
            other => Err(format!("unknown suite `{other}` (expected generation, missing or mapping)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRunConfig {
    /// Name of the backend, recorded in the report.
    pub backend: String,
    pub shots: usize,
    pub suite: Suite,
    pub testset_path: PathBuf,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub max_concurrency: usize,
}

impl EvalRunConfig {
    pub fn new(backend: &str, suite: Suite, testset_path: PathBuf, output_dir: PathBuf) -> Self {
        Self {
            backend: backend.to_owned(),
            shots: 0,
            suite,
            testset_path,
            seed: 42,
            output_dir,
            max_concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SectionScore {
    pub rouge1_f: f64,
    pub meteor: f64,
}

/// Flags for one maskable section: on the masked variant (positive) and on
/// the untouched original (negative).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub masked_flagged: bool,
    pub original_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub bug_id: u64,
    pub ctqrs_percent: f64,
    pub metric: MetricReport,
    pub parse_failed: bool,
    /// Mapping suite only. A section absent on either side has no entry.
    pub per_section: Option<BTreeMap<SectionKind, SectionScore>>,
    /// Missing suite only. Sections that could not be masked have no entry.
    pub detection: Option<BTreeMap<SectionKind, Detection>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `2tp / (2tp + fp + fn)`, 0 when nothing was predicted or expected.
    pub fn f1(&self) -> f64 {
        let den = 2 * self.tp + self.fp + self.fn_;
        if den == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / den as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }

    pub fn record(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// Each detection entry contributes one positive and one negative variant.
pub fn confusion_from_rows(rows: &[EvalRow]) -> BTreeMap<SectionKind, ConfusionCounts> {
    let mut out: BTreeMap<SectionKind, ConfusionCounts> =
        MASKABLE.into_iter().map(|k| (k, ConfusionCounts::default())).collect();
    for row in rows {
        for (kind, d) in row.detection.iter().flatten() {
            let c = out.entry(*kind).or_default();
            c.record(true, d.masked_flagged);
            c.record(false, d.original_flagged);
        }
    }
    out
}

/// Everything a suite needs besides the test cases.
pub struct EvalContext<'a> {
    pub backend: &'a dyn ChatBackend,
    pub embedder: &'a dyn EmbeddingProvider,
    pub engine: CtqrsEngine,
    pub shots: usize,
    pub seed: u64,
    /// Exemplar pool for few-shot prompts, keyed by bug id.
    pub pool: Vec<(String, Shot)>,
}

impl<'a> EvalContext<'a> {
    pub fn new(backend: &'a dyn ChatBackend, embedder: &'a dyn EmbeddingProvider) -> Self {
        Self { backend, embedder, engine: CtqrsEngine::default(), shots: 0, seed: 42, pool: Vec::new() }
    }

    pub fn with_shots(mut self, shots: usize, seed: u64, cases: &[TestCase]) -> Self {
        self.shots = shots;
        self.seed = seed;
        self.pool = cases
            .iter()
            .map(|c| (c.bug_id.to_string(), Shot { input: c.unstructured.clone(), output: c.gold.clone() }))
            .collect();
        self
    }

    /// Zero shots use the Alpaca layout; otherwise exemplars are drawn per
    /// row from the pool, never including the row itself.
    pub fn messages(&self, bug_id: u64, unstructured: &str) -> Vec<ChatMessage> {
        if self.shots == 0 {
            return build_alpaca_messages(unstructured);
        }
        let id = bug_id.to_string();
        let shots: Vec<Shot> = sample_shots(&self.pool, self.shots, self.seed.wrapping_add(bug_id), Some(&id))
            .into_iter()
            .cloned()
            .collect();
        build_fewshot_messages(&shots, unstructured)
    }

    fn structure(&self, bug_id: u64, unstructured: &str) -> Result<Option<StructuredReport>, ProviderError> {
        Ok(generate(self.backend, &self.messages(bug_id, unstructured))?.report)
    }
}

fn failed_row(bug_id: u64) -> EvalRow {
    EvalRow {
        bug_id,
        ctqrs_percent: 0.0,
        metric: MetricReport { embedding_similarity: Some(0.0), ..MetricReport::zero() },
        parse_failed: true,
        per_section: None,
        detection: None,
    }
}

/// Scores one generation against the gold report on rendered text.
pub fn score_generation(
    ctx: &EvalContext<'_>,
    bug_id: u64,
    generated: Option<&StructuredReport>,
    gold: &StructuredReport,
) -> Result<EvalRow, ProviderError> {
    let Some(report) = generated else {
        return Ok(failed_row(bug_id));
    };
    let metric = MetricReport::compute(&render_report(report), &render_report(gold), Some(ctx.embedder))?;
    Ok(EvalRow {
        bug_id,
        ctqrs_percent: ctx.engine.score(report).percent(),
        metric,
        parse_failed: false,
        per_section: None,
        detection: None,
    })
}

/// Per-section scores between generated and gold section text. Sections
/// empty on either side are left out. A failed parse scores 0 everywhere.
pub fn section_scores(
    generated: Option<&StructuredReport>,
    gold: &StructuredReport,
) -> BTreeMap<SectionKind, SectionScore> {
    SectionKind::BODY
        .into_iter()
        .filter_map(|kind| match generated {
            None => Some((kind, SectionScore::default())),
            Some(g) if g.is_section_empty(kind) || gold.is_section_empty(kind) => None,
            Some(g) => {
                let c = tokenize(&g.section_text(kind));
                let r = tokenize(&gold.section_text(kind));
                Some((kind, SectionScore { rouge1_f: rouge1(&c, &r).f1, meteor: meteor(&c, &r) }))
            }
        })
        .collect()
}

fn eval_case(ctx: &EvalContext<'_>, suite: Suite, case: &TestCase) -> Result<EvalRow, ProviderError> {
    let generated = ctx.structure(case.bug_id, &case.unstructured)?;
    let mut row = score_generation(ctx, case.bug_id, generated.as_ref(), &case.gold)?;
    match suite {
        Suite::Generation => {}
        Suite::Mapping => row.per_section = Some(section_scores(generated.as_ref(), &case.gold)),
        Suite::Missing => {
            let mut detection = BTreeMap::new();
            for kind in MASKABLE {
                let masked = match mask_section(&case.unstructured, &case.gold, kind) {
                    Ok(m) => m,
                    Err(MaskError::NothingToMask(_) | MaskError::NotMaskable(_)) => continue,
                };
                let flagged = |r: &Option<StructuredReport>| {
                    r.as_ref().is_some_and(|r| r.missing_fields.contains(&kind))
                };
                let masked_gen = ctx.structure(case.bug_id, &masked)?;
                detection.insert(
                    kind,
                    Detection { masked_flagged: flagged(&masked_gen), original_flagged: flagged(&generated) },
                );
            }
            row.detection = Some(detection);
        }
    }
    Ok(row)
}

/// Rows in bug-id order. On a provider failure the rows that did complete
/// come back alongside the first error.
pub fn run_rows(
    ctx: &EvalContext<'_>,
    suite: Suite,
    cases: &[TestCase],
    max_concurrency: usize,
) -> Result<Vec<EvalRow>, (Vec<EvalRow>, ProviderError)> {
    let mut sorted: Vec<&TestCase> = cases.iter().collect();
    sorted.sort_by_key(|c| c.bug_id);
    let results = par::map_bounded(&sorted, max_concurrency, |c| eval_case(ctx, suite, c));
    let mut rows = Vec::with_capacity(results.len());
    let mut first_err = None;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        None => Ok(rows),
        Some(e) => Err((rows, e)),
    }
}
