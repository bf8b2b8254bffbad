//! Instruction-tuning JSONL and dataset metadata.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use reportsmith_core::ctqrs::RULE_TABLE_VERSION;
use reportsmith_core::report::{json_to_report, report_to_json, ReportError};
use reportsmith_core::StructuredReport;
use reportsmith_gateway::config::RECIPE_MODELS;
use reportsmith_gateway::prompt::INSTRUCTION;
use reportsmith_gateway::TrainingRecipe;

use crate::split::SplitRatios;
use crate::synth::SynthesisConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub bug_id: u64,
    pub embedding_similarity: f64,
    pub cosine_tf: f64,
}

/// One Alpaca-style training row. `output` is the structured report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionExample {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub provenance: Provenance,
}

impl InstructionExample {
    pub fn new(input: String, report: &StructuredReport, provenance: Provenance) -> Self {
        Self { instruction: INSTRUCTION.to_owned(), input, output: report_to_json(report), provenance }
    }

    pub fn report(&self) -> Result<StructuredReport, ReportError> {
        json_to_report(&self.output)
    }
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> io::Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), i + 1))
        })?);
    }
    Ok(out)
}

#[derive(Serialize)]
struct AlpacaRow<'a> {
    instruction: &'a str,
    input: &'a str,
    output: &'a str,
}

/// Writes `{"instruction","input","output"}` per line to `path` and the
/// metadata sidecar as `metadata.json` in the same directory.
pub fn export_instruction_jsonl(
    examples: &[InstructionExample],
    path: &Path,
    metadata: &DatasetMetadata,
) -> io::Result<()> {
    let rows: Vec<AlpacaRow<'_>> = examples
        .iter()
        .map(|e| AlpacaRow { instruction: &e.instruction, input: &e.input, output: &e.output })
        .collect();
    write_jsonl(&rows, path)?;
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    metadata.write(&dir.join(METADATA_FILE))
}

pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
    pub validation: usize,
}

/// Sidecar describing how the exported dataset was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub prompt_template: String,
    pub rule_table: String,
    pub synthesis: SynthesisConfig,
    pub split: SplitRatios,
    pub counts: SplitCounts,
    pub training_recipes: Vec<TrainingRecipe>,
}

impl DatasetMetadata {
    pub fn new(synthesis: SynthesisConfig, split: SplitRatios, counts: SplitCounts) -> Self {
        Self {
            prompt_template: "alpaca".into(),
            rule_table: RULE_TABLE_VERSION.into(),
            synthesis,
            split,
            counts,
            training_recipes: RECIPE_MODELS.iter().map(|m| TrainingRecipe::for_model(m)).collect(),
        }
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}
