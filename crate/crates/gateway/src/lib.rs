//! Backend access for report structuring: prompt templates, an
//! OpenAI-compatible HTTP client, generation parsing and offline mocks.

pub mod client;
pub mod config;
pub mod generation;
pub mod mock;
pub mod prompt;

pub use client::{generate, ChatBackend, Completion, HttpBackend, RetryPolicy, TelemetrySnapshot};
pub use config::{BackendConfig, ConfigError, TrainingRecipe};
pub use generation::{parse_generation, GenerationResult, MalformedGeneration};
pub use mock::{MockBackend, MockBehavior, ScriptedEmbedder};
pub use prompt::{
    build_alpaca_messages, build_alpaca_prompt, build_fewshot_messages, build_synthesis_prompt,
    ChatMessage, PromptBundle, Role, Shot,
};
pub use reportsmith_core::metrics::ProviderError;
