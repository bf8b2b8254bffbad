//! Core of the reportsmith toolkit: the bug-report document model, the CTQRS
//! rule engine, and the text metrics used to evaluate generated reports.

pub mod artifacts;
pub mod ctqrs;
pub mod fixtures;
pub mod lexicon;
pub mod metrics;
pub mod par;
pub mod report;
pub mod text;

pub use artifacts::{detect_artifacts, ArtifactKind, ArtifactSpan};
pub use ctqrs::{score, score_percent, CtqrsBreakdown, CtqrsEngine, RuleId, RuleResult};
pub use metrics::{
    cosine_tf, embedding_similarity, meteor, rouge1, EmbeddingProvider, HashedBagEmbedder,
    MetricReport, ProviderError, Rouge1,
};
pub use report::{
    json_to_report, parse_sections, render_report, report_to_json, RawReport, ReportError,
    SectionKind, StructuredReport,
};
pub use text::{tokenize, TokenSequence};
