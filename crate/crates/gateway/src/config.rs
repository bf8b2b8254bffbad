use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const API_KEY_ENV_PREFIX: &str = "REPORTSMITH_API_KEY_";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid backend config `{name}`: {reason}")]
pub struct ConfigError {
    pub name: String,
    pub reason: String,
}

/// Connection settings for one OpenAI-compatible backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub name: String,
    pub base_url: String,
    pub model_id: String,
    /// Name of the env var holding the bearer token; defaults to
    /// `REPORTSMITH_API_KEY_<NAME>`.
    #[serde(default)]
    pub api_key_ref: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    /// Seconds.
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default)]
    pub temperature: f64,
    /// Model for `/v1/embeddings`; embedding calls use `model_id` when unset.
    #[serde(default)]
    pub embedding_model: Option<String>,
}

fn default_concurrency() -> usize {
    4
}

fn default_timeout() -> f64 {
    60.0
}

impl BackendConfig {
    pub fn new(name: &str, base_url: &str, model_id: &str) -> Self {
        Self {
            name: name.to_owned(),
            base_url: base_url.to_owned(),
            model_id: model_id.to_owned(),
            api_key_ref: None,
            max_concurrency: default_concurrency(),
            timeout: default_timeout(),
            temperature: 0.0,
            embedding_model: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |reason: &str| {
            Err(ConfigError { name: self.name.clone(), reason: reason.to_owned() })
        };
        if self.name.trim().is_empty() {
            return fail("name is empty");
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return fail("base_url must be an http(s) URL");
        }
        if self.max_concurrency < 1 {
            return fail("max_concurrency must be >= 1");
        }
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return fail("timeout must be > 0");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return fail("temperature must be >= 0");
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout)
    }

    pub fn api_key_env(&self) -> String {
        self.api_key_ref.clone().unwrap_or_else(|| {
            let suffix: String = self
                .name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
                .collect();
            format!("{API_KEY_ENV_PREFIX}{suffix}")
        })
    }

    pub fn api_key(&self) -> Option<String> {
        std::env::var(self.api_key_env()).ok().filter(|k| !k.is_empty())
    }

    pub fn endpoint(&self, path: &str) -> String {
        format!("{}/v1/{path}", self.base_url.trim_end_matches('/'))
    }
}

pub const RECIPE_MODELS: [&str; 3] =
    ["Qwen2.5-7B-Instruct", "Mistral-7B-Instruct-v0.3", "Llama-3.2-3B-Instruct"];

/// Fine-tuning hyperparameters, carried as dataset metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecipe {
    pub model: String,
    pub lora_rank: u32,
    pub target_modules: Vec<String>,
    pub epochs: u32,
    pub learning_rate: f64,
    pub batch_size: u32,
    pub cross_validation_folds: u32,
}

pub const TARGET_MODULES: [&str; 7] =
    ["q_proj", "k_proj", "o_proj", "v_proj", "down_proj", "gate_proj", "up_proj"];

impl TrainingRecipe {
    /// Learning rate follows model size: 3e-3 for 3B-class models, 2e-4 otherwise.
    pub fn for_model(model: &str) -> Self {
        let small = model.to_ascii_lowercase().contains("3b");
        Self {
            model: model.to_owned(),
            lora_rank: 16,
            target_modules: TARGET_MODULES.iter().map(|s| s.to_string()).collect(),
            epochs: 3,
            learning_rate: if small { 3e-3 } else { 2e-4 },
            batch_size: 8,
            cross_validation_folds: 4,
        }
    }
}
