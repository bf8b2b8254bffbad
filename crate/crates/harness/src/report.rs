//! Aggregation and the on-disk result files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use reportsmith_core::ctqrs::RULE_TABLE_VERSION;
use reportsmith_core::SectionKind;

use crate::eval::{confusion_from_rows, ConfusionCounts, EvalRow, Suite};
use crate::mask::MASKABLE;
use crate::HarnessError;

pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const ROWS_FILE: &str = "rows.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const RUN_FILE: &str = "run.json";
pub const REFERENCE_FILE: &str = "reference_rows.csv";

/// Published results of tuned models, kept for side-by-side comparison.
pub const PUBLISHED_RESULTS: &str = include_str!("../fixtures/published_results.csv");

pub const CONFUSION_HEADER: [&str; 8] = ["section", "tp", "fp", "fn", "tn", "total", "accuracy", "f1"];

/// Column names of rows.csv, in order.
pub fn rows_header() -> Vec<String> {
    let mut h: Vec<String> = [
        "bug_id",
        "parse_failed",
        "ctqrs_percent",
        "rouge1_p",
        "rouge1_r",
        "rouge1_f",
        "meteor",
        "cosine_tf",
        "embedding_similarity",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in SectionKind::BODY {
        h.push(format!("{}_rouge1_f", k.abbrev()));
        h.push(format!("{}_meteor", k.abbrev()));
    }
    for k in MASKABLE {
        h.push(format!("{}_masked_flagged", k.abbrev()));
        h.push(format!("{}_original_flagged", k.abbrev()));
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub accuracy: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl From<ConfusionCounts> for DetectionSummary {
    fn from(c: ConfusionCounts) -> Self {
        Self { accuracy: c.accuracy(), f1: c.f1(), tp: c.tp, fp: c.fp, fn_: c.fn_, tn: c.tn }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingSummary {
    pub rouge1_f: f64,
    pub meteor: f64,
    /// Rows that contributed to the means.
    pub n: usize,
    /// Rows left out because the section was empty on one side.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub suite: Suite,
    pub backend: String,
    pub shots: usize,
    pub seed: u64,
    pub rule_table: String,
    pub n: usize,
    pub ctqrs_percent_mean: f64,
    pub rouge1_f_mean: f64,
    pub meteor_mean: f64,
    pub embedding_similarity_mean: f64,
    pub detection: BTreeMap<SectionKind, DetectionSummary>,
    pub mapping: BTreeMap<SectionKind, MappingSummary>,
    /// Rows whose generation did not parse; they count as zeros in the means.
    pub parse_failed: usize,
    pub mapping_excluded: usize,
}

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        (0.0, 0)
    } else {
        (sum / n as f64, n)
    }
}

/// Sequential reduce over rows in the given order.
pub fn aggregate(suite: Suite, backend: &str, shots: usize, seed: u64, rows: &[EvalRow]) -> AggregateReport {
    let m = |f: fn(&EvalRow) -> f64| mean(rows.iter().map(f)).0;
    let detection = if suite == Suite::Missing {
        confusion_from_rows(rows).into_iter().map(|(k, c)| (k, c.into())).collect()
    } else {
        BTreeMap::new()
    };
    let mut mapping = BTreeMap::new();
    let mut mapping_excluded = 0;
    if suite == Suite::Mapping {
        for kind in SectionKind::BODY {
            let scores: Vec<_> = rows
                .iter()
                .filter_map(|r| r.per_section.as_ref().and_then(|p| p.get(&kind)))
                .collect();
            let excluded = rows.len() - scores.len();
            mapping_excluded += excluded;
            let (rouge1_f, n) = mean(scores.iter().map(|s| s.rouge1_f));
            let (meteor, _) = mean(scores.iter().map(|s| s.meteor));
            mapping.insert(kind, MappingSummary { rouge1_f, meteor, n, excluded });
        }
    }
    AggregateReport {
        suite,
        backend: backend.to_owned(),
        shots,
        seed,
        rule_table: RULE_TABLE_VERSION.to_owned(),
        n: rows.len(),
        ctqrs_percent_mean: m(|r| r.ctqrs_percent),
        rouge1_f_mean: m(|r| r.metric.rouge1.f1),
        meteor_mean: m(|r| r.metric.meteor),
        embedding_similarity_mean: m(|r| r.metric.embedding_similarity.unwrap_or(0.0)),
        detection,
        mapping,
        parse_failed: rows.iter().filter(|r| r.parse_failed).count(),
        mapping_excluded,
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_owned(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io { path: path.to_owned(), source: e.into() }
}

fn opt_f(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_b(v: Option<bool>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_rows_csv(rows: &[EvalRow], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(rows_header()).map_err(csv_err(path))?;
    for r in rows {
        let mut rec = vec![
            r.bug_id.to_string(),
            r.parse_failed.to_string(),
            r.ctqrs_percent.to_string(),
            r.metric.rouge1.precision.to_string(),
            r.metric.rouge1.recall.to_string(),
            r.metric.rouge1.f1.to_string(),
            r.metric.meteor.to_string(),
            r.metric.cosine_tf.to_string(),
            opt_f(r.metric.embedding_similarity),
        ];
        for k in SectionKind::BODY {
            let s = r.per_section.as_ref().and_then(|p| p.get(&k));
            rec.push(opt_f(s.map(|s| s.rouge1_f)));
            rec.push(opt_f(s.map(|s| s.meteor)));
        }
        for k in MASKABLE {
            let d = r.detection.as_ref().and_then(|d| d.get(&k));
            rec.push(opt_b(d.map(|d| d.masked_flagged)));
            rec.push(opt_b(d.map(|d| d.original_flagged)));
        }
        w.write_record(rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn write_confusion_csv(rows: &[EvalRow], path: &Path) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(CONFUSION_HEADER).map_err(csv_err(path))?;
    for (kind, c) in confusion_from_rows(rows) {
        w.write_record([
            kind.as_str().to_owned(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            c.total().to_string(),
            c.accuracy().to_string(),
            c.f1().to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

/// Wall-clock facts about a run. Kept apart from aggregate.json so that
/// file stays identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub started_at: String,
    pub finished_at: String,
    pub elapsed_secs: f64,
    pub testset: String,
    pub completed_rows: usize,
    pub error: Option<String>,
}

/// Writes aggregate.json, rows.csv, confusion.csv and the reference rows
/// into `dir`. Same inputs, same bytes.
pub fn emit_report(aggregate: &AggregateReport, rows: &[EvalRow], dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let agg_path = dir.join(AGGREGATE_FILE);
    let mut json = serde_json::to_string_pretty(aggregate).expect("aggregate serializes");
    json.push('\n');
    std::fs::write(&agg_path, json).map_err(io(&agg_path))?;
    write_rows_csv(rows, &dir.join(ROWS_FILE))?;
    write_confusion_csv(rows, &dir.join(CONFUSION_FILE))?;
    let ref_path = dir.join(REFERENCE_FILE);
    std::fs::write(&ref_path, PUBLISHED_RESULTS).map_err(io(&ref_path))
}

pub fn write_run_info(info: &RunInfo, dir: &Path) -> Result<(), HarnessError> {
    let path = dir.join(RUN_FILE);
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let json = serde_json::to_string_pretty(info).expect("run info serializes");
    std::fs::write(&path, json + "\n").map_err(io(&path))
}

pub fn read_aggregate(path: &Path) -> Result<AggregateReport, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Malformed(format!("{}: {e}", path.display())))
}
