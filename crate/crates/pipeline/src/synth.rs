//! Pseudo-ground-truth generation: rewrite structured reports as free text
//! and keep only rewrites that stay close to the original.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use reportsmith_core::metrics::{cosine_tf, embedding_similarity, EmbeddingProvider, ProviderError};
use reportsmith_core::{par, render_report, tokenize, StructuredReport};
use reportsmith_gateway::{build_synthesis_prompt, ChatBackend, ChatMessage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub attempts: u32,
    /// Embedding similarity must be strictly above this.
    pub embedding_min: f64,
    /// Term-frequency cosine must be strictly above this.
    pub cosine_min: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self { attempts: 3, embedding_min: 0.85, cosine_min: 0.80 }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.attempts < 1 {
            return Err("synthesis.attempts must be >= 1".into());
        }
        for (name, v) in [("embedding_min", self.embedding_min), ("cosine_min", self.cosine_min)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!("synthesis.{name} must be in (0, 1)"));
            }
        }
        Ok(())
    }

    pub fn retains(&self, embedding: f64, cosine: f64) -> bool {
        embedding > self.embedding_min && cosine > self.cosine_min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLog {
    pub attempt: u32,
    pub text: String,
    pub embedding_similarity: f64,
    pub cosine_tf: f64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synthesis {
    pub text: String,
    pub embedding_similarity: f64,
    pub cosine_tf: f64,
    pub attempts: Vec<AttemptLog>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("no candidate passed retention in {} attempts", .attempts.len())]
    RetentionFailed { attempts: Vec<AttemptLog> },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Asks `backend` for up to `cfg.attempts` rewrites of the rendered report
/// and returns the first whose similarity to it clears both gates.
pub fn synthesize_unstructured(
    backend: &dyn ChatBackend,
    report: &StructuredReport,
    cfg: &SynthesisConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<Synthesis, SynthesisError> {
    let original = render_report(report);
    let original_tokens = tokenize(&original);
    let messages = [ChatMessage::user(build_synthesis_prompt(&original))];
    let mut log = Vec::new();
    for attempt in 1..=cfg.attempts {
        let text = backend.chat_complete(&messages)?.content.trim().to_owned();
        let embedding = embedding_similarity(provider, &text, &original)?;
        let cosine = cosine_tf(&tokenize(&text), &original_tokens);
        let retained = cfg.retains(embedding, cosine);
        log.push(AttemptLog {
            attempt,
            text: text.clone(),
            embedding_similarity: embedding,
            cosine_tf: cosine,
            retained,
        });
        if retained {
            return Ok(Synthesis { text, embedding_similarity: embedding, cosine_tf: cosine, attempts: log });
        }
    }
    Err(SynthesisError::RetentionFailed { attempts: log })
}

/// Per-report outcome of a batch, in input order.
pub fn synthesize_many(
    backend: &dyn ChatBackend,
    reports: &[StructuredReport],
    cfg: &SynthesisConfig,
    provider: &dyn EmbeddingProvider,
    max_workers: usize,
) -> Vec<Result<Synthesis, SynthesisError>> {
    par::map_bounded(reports, max_workers, |r| synthesize_unstructured(backend, r, cfg, provider))
}
