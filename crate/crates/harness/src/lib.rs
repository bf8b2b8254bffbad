//! Evaluation harness: generation quality, missing-information detection
//! by section masking, and per-section mapping fidelity.

pub mod eval;
pub mod mask;
pub mod report;
pub mod testset;

use std::path::PathBuf;
use std::time::Instant;

use thiserror::Error;

use reportsmith_core::metrics::{EmbeddingProvider, ProviderError};
use reportsmith_gateway::ChatBackend;

pub use eval::{
    confusion_from_rows, run_rows, section_scores, ConfusionCounts, Detection, EvalContext, EvalRow,
    EvalRunConfig, SectionScore, Suite,
};
pub use mask::{mask_section, mask_section_with, MaskError, MASKABLE};
pub use report::{aggregate, emit_report, AggregateReport, DetectionSummary, MappingSummary, RunInfo};
pub use testset::{load_testset, synthetic_testset, write_testset, TestCase};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("test set: {0}")]
    Testset(String),
    #[error("malformed result file: {0}")]
    Malformed(String),
    #[error("run aborted after {completed} rows: {source}")]
    Provider { completed: usize, source: ProviderError },
}

/// Loads the test set, runs the configured suite and writes the result
/// files. On a provider failure the completed rows are still written
/// before the error is returned.
pub fn run_eval(
    cfg: &EvalRunConfig,
    backend: &dyn ChatBackend,
    embedder: &dyn EmbeddingProvider,
) -> Result<AggregateReport, HarnessError> {
    let started = chrono::Utc::now();
    let clock = Instant::now();
    let cases = load_testset(&cfg.testset_path)?;
    let ctx = EvalContext::new(backend, embedder).with_shots(cfg.shots, cfg.seed, &cases);
    let (rows, failure) = match run_rows(&ctx, cfg.suite, &cases, cfg.max_concurrency) {
        Ok(rows) => (rows, None),
        Err((rows, e)) => (rows, Some(e)),
    };
    let agg = aggregate(cfg.suite, &cfg.backend, cfg.shots, cfg.seed, &rows);
    emit_report(&agg, &rows, &cfg.output_dir)?;
    let info = RunInfo {
        started_at: started.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        elapsed_secs: clock.elapsed().as_secs_f64(),
        testset: cfg.testset_path.display().to_string(),
        completed_rows: rows.len(),
        error: failure.as_ref().map(|e| e.to_string()),
    };
    report::write_run_info(&info, &cfg.output_dir)?;
    match failure {
        None => Ok(agg),
        Some(source) => Err(HarnessError::Provider { completed: rows.len(), source }),
    }
}
