//! Dataset construction: Bugzilla mining, filtering, synthetic unstructured
//! inputs, seeded splits and instruction-tuning export.

pub mod bugzilla;
pub mod corpus;
pub mod export;
pub mod filter;
pub mod split;
pub mod synth;

pub use bugzilla::{fetch_fixed_bugs, BugzillaBug, Comment, Cursor, FetchConfig, FetchError, PartialFetch};
pub use export::{export_instruction_jsonl, DatasetMetadata, InstructionExample, Provenance};
pub use filter::{filter_corpus, filter_report, FilterOutcome, FilterStats, FilteredRecord, RejectionReason};
pub use split::{split_dataset, Split, SplitRatios};
pub use synth::{synthesize_unstructured, AttemptLog, Synthesis, SynthesisConfig, SynthesisError};
