//! On-disk corpus layout and the stage runners that read and write it.
//!
//! ```text
//! <root>/raw/bugs.jsonl            fetched bugs
//! <root>/filtered/reports.jsonl    accepted, structured
//! <root>/filtered/stats.json       per-reason counters
//! <root>/rejections.csv            bug_id,reason
//! <root>/synth/examples.jsonl      retained instruction examples
//! <root>/synth/attempts.jsonl      every synthesis attempt
//! <root>/splits/{train,test,validation}.jsonl
//! <root>/metadata.json
//! ```

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use reportsmith_core::ctqrs::CtqrsEngine;
use reportsmith_core::metrics::{EmbeddingProvider, ProviderError};
use reportsmith_gateway::ChatBackend;

use crate::bugzilla::BugzillaBug;
use crate::export::{read_jsonl, write_jsonl, DatasetMetadata, InstructionExample, Provenance, SplitCounts, METADATA_FILE};
use crate::filter::{filter_corpus, write_rejections_csv, FilterStats, FilteredRecord};
use crate::split::{split_dataset, SplitRatios};
use crate::synth::{synthesize_many, AttemptLog, SynthesisConfig, SynthesisError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_owned(), source }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
}

impl Corpus {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn raw_bugs(&self) -> PathBuf {
        self.root.join("raw/bugs.jsonl")
    }

    pub fn filtered(&self) -> PathBuf {
        self.root.join("filtered/reports.jsonl")
    }

    pub fn filter_stats(&self) -> PathBuf {
        self.root.join("filtered/stats.json")
    }

    pub fn rejections(&self) -> PathBuf {
        self.root.join("rejections.csv")
    }

    pub fn synth_examples(&self) -> PathBuf {
        self.root.join("synth/examples.jsonl")
    }

    pub fn synth_attempts(&self) -> PathBuf {
        self.root.join("synth/attempts.jsonl")
    }

    pub fn split(&self, name: &str) -> PathBuf {
        self.root.join("splits").join(format!("{name}.jsonl"))
    }

    pub fn metadata(&self) -> PathBuf {
        self.root.join(METADATA_FILE)
    }

    pub fn cursor(&self) -> PathBuf {
        self.root.join("raw/cursor.json")
    }

    pub fn read_bugs(&self) -> Result<Vec<BugzillaBug>, CorpusError> {
        let p = self.raw_bugs();
        read_jsonl(&p).map_err(io_at(&p))
    }

    /// Appends to `raw/bugs.jsonl`, keeping one entry per bug id.
    pub fn store_bugs(&self, bugs: &[BugzillaBug]) -> Result<usize, CorpusError> {
        let p = self.raw_bugs();
        let mut all = if p.exists() { self.read_bugs()? } else { Vec::new() };
        let before = all.len();
        for b in bugs {
            if !all.iter().any(|x| x.bug_id == b.bug_id) {
                all.push(b.clone());
            }
        }
        write_jsonl(&all, &p).map_err(io_at(&p))?;
        Ok(all.len() - before)
    }

    pub fn read_filtered(&self) -> Result<Vec<FilteredRecord>, CorpusError> {
        let p = self.filtered();
        read_jsonl(&p).map_err(io_at(&p))
    }

    pub fn read_examples(&self) -> Result<Vec<InstructionExample>, CorpusError> {
        let p = self.synth_examples();
        read_jsonl(&p).map_err(io_at(&p))
    }
}

/// Filters `raw/bugs.jsonl`, writing the accepted set, stats and rejections.
pub fn run_filter(corpus: &Corpus, engine: &CtqrsEngine) -> Result<FilterStats, CorpusError> {
    let bugs = corpus.read_bugs()?;
    let run = filter_corpus(engine, &bugs);
    let p = corpus.filtered();
    write_jsonl(&run.accepted, &p).map_err(io_at(&p))?;
    let p = corpus.rejections();
    write_rejections_csv(&run.outcomes, &p).map_err(io_at(&p))?;
    let p = corpus.filter_stats();
    let text = serde_json::to_string_pretty(&run.stats).expect("stats serialize");
    std::fs::write(&p, text + "\n").map_err(io_at(&p))?;
    Ok(run.stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub bug_id: u64,
    pub retained: bool,
    pub attempts: Vec<AttemptLog>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthStats {
    pub attempted: usize,
    pub retained: usize,
    pub retention_failed: usize,
}

/// Synthesizes unstructured inputs for every filtered report. Retained
/// examples and the attempt log are written even when a provider error
/// stops the run; the error is returned afterwards.
pub fn run_synth(
    corpus: &Corpus,
    backend: &dyn ChatBackend,
    cfg: &SynthesisConfig,
    provider: &dyn EmbeddingProvider,
    max_workers: usize,
) -> Result<SynthStats, CorpusError> {
    let records = corpus.read_filtered()?;
    let reports: Vec<_> = records.iter().map(|r| r.report.clone()).collect();
    let results = synthesize_many(backend, &reports, cfg, provider, max_workers);

    let mut stats = SynthStats::default();
    let mut examples = Vec::new();
    let mut log = Vec::new();
    let mut first_error = None;
    for (rec, result) in records.iter().zip(results) {
        stats.attempted += 1;
        match result {
            Ok(s) => {
                stats.retained += 1;
                let provenance = Provenance {
                    bug_id: rec.bug_id,
                    embedding_similarity: s.embedding_similarity,
                    cosine_tf: s.cosine_tf,
                };
                examples.push(InstructionExample::new(s.text, &rec.report, provenance));
                log.push(AttemptRecord { bug_id: rec.bug_id, retained: true, attempts: s.attempts });
            }
            Err(SynthesisError::RetentionFailed { attempts }) => {
                stats.retention_failed += 1;
                log.push(AttemptRecord { bug_id: rec.bug_id, retained: false, attempts });
            }
            Err(SynthesisError::Provider(e)) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let p = corpus.synth_examples();
    write_jsonl(&examples, &p).map_err(io_at(&p))?;
    let p = corpus.synth_attempts();
    write_jsonl(&log, &p).map_err(io_at(&p))?;
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(stats),
    }
}

/// Splits the retained examples and writes the three split files plus
/// `metadata.json`.
pub fn run_split(
    corpus: &Corpus,
    ratios: &SplitRatios,
    synthesis: &SynthesisConfig,
) -> Result<SplitCounts, CorpusError> {
    let mut examples = corpus.read_examples()?;
    examples.sort_by_key(|e| e.provenance.bug_id);
    let split = split_dataset(&examples, ratios);
    for (name, part) in split.parts() {
        let p = corpus.split(name);
        write_jsonl(part, &p).map_err(io_at(&p))?;
    }
    let (train, test, validation) = split.sizes();
    let counts = SplitCounts { train, test, validation };
    let p = corpus.metadata();
    DatasetMetadata::new(*synthesis, *ratios, counts.clone()).write(&p).map_err(io_at(&p))?;
    Ok(counts)
}
