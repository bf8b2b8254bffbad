//! TOML application config.
//!
//! ```toml
//! default_backend = "qwen"
//! lexicon_paths = ["lexicons"]
//! embedding_backend = "qwen"      # optional, hashed-bag fallback otherwise
//!
//! [backends.qwen]
//! base_url = "http://127.0.0.1:8000"
//! model_id = "qwen2.5-7b-instruct-ft"
//! max_concurrency = 4
//! timeout = 60
//!
//! [backends.offline]
//! mock = "flag_missing"
//!
//! [synthesis]
//! attempts = 3
//! embedding_min = 0.85
//! cosine_min = 0.80
//!
//! [split]
//! train = 0.8
//! test = 0.1
//! validation = 0.1
//! seed = 42
//!
//! [service]
//! bind = "127.0.0.1"
//! port = 8080
//! allowed_origins = ["http://localhost:5173"]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use reportsmith_core::ctqrs::CtqrsEngine;
use reportsmith_core::lexicon::Lexicons;
use reportsmith_core::metrics::{EmbeddingProvider, HashedBagEmbedder};
use reportsmith_gateway::{BackendConfig, ChatBackend, HttpBackend, MockBackend, MockBehavior, RetryPolicy};
use reportsmith_pipeline::{SplitRatios, SynthesisConfig};

pub const CONFIG_ENV: &str = "REPORTSMITH_CONFIG";

/// Backend names of this form resolve to an offline mock without any
/// config entry, e.g. `mock:flag_missing`.
pub const MOCK_PREFIX: &str = "mock:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendEntry {
    /// Mock behavior name; when set, no HTTP settings are used.
    #[serde(default)]
    pub mock: Option<String>,
    #[serde(default)]
    pub base_url: Option<String>,
    #[serde(default)]
    pub model_id: Option<String>,
    #[serde(default)]
    pub api_key_ref: Option<String>,
    #[serde(default)]
    pub max_concurrency: Option<usize>,
    #[serde(default)]
    pub timeout: Option<f64>,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub embedding_model: Option<String>,
    /// Retries after a timeout or 5xx; 3 when unset.
    #[serde(default)]
    pub max_retries: Option<u32>,
}

impl BackendEntry {
    pub fn mock(behavior: &str) -> Self {
        Self {
            mock: Some(behavior.to_owned()),
            base_url: None,
            model_id: None,
            api_key_ref: None,
            max_concurrency: None,
            timeout: None,
            temperature: None,
            embedding_model: None,
            max_retries: None,
        }
    }

    fn http_backend(&self, name: &str) -> Result<HttpBackend, String> {
        let retry = RetryPolicy { max_retries: self.max_retries.unwrap_or(3), ..RetryPolicy::default() };
        Ok(HttpBackend::new(self.http_config(name)?).map_err(|e| e.to_string())?.with_retry(retry))
    }

    pub fn http_config(&self, name: &str) -> Result<BackendConfig, String> {
        let (Some(base_url), Some(model_id)) = (&self.base_url, &self.model_id) else {
            return Err(format!("backend `{name}` needs base_url and model_id (or mock)"));
        };
        let mut c = BackendConfig::new(name, base_url, model_id);
        c.api_key_ref = self.api_key_ref.clone();
        if let Some(n) = self.max_concurrency {
            c.max_concurrency = n;
        }
        if let Some(t) = self.timeout {
            c.timeout = t;
        }
        if let Some(t) = self.temperature {
            c.temperature = t;
        }
        c.embedding_model = self.embedding_model.clone();
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default)]
    pub allowed_origins: Vec<String>,
}

fn default_bind() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { bind: default_bind(), port: default_port(), allowed_origins: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    #[serde(default = "default_backends")]
    pub backends: BTreeMap<String, BackendEntry>,
    #[serde(default = "default_backend_name")]
    pub default_backend: String,
    #[serde(default)]
    pub embedding_backend: Option<String>,
    #[serde(default)]
    pub lexicon_paths: Vec<PathBuf>,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub split: SplitRatios,
    #[serde(default)]
    pub service: ServiceConfig,
}

fn default_backends() -> BTreeMap<String, BackendEntry> {
    BTreeMap::from([("mock".to_owned(), BackendEntry::mock("perfect_extractor"))])
}

fn default_backend_name() -> String {
    "mock".into()
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            backends: default_backends(),
            default_backend: default_backend_name(),
            embedding_backend: None,
            lexicon_paths: Vec::new(),
            synthesis: SynthesisConfig::default(),
            split: SplitRatios::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl AppConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// `path`, else `$REPORTSMITH_CONFIG`, else built-in defaults.
    pub fn discover(path: Option<&Path>) -> Result<Self, String> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.backends.contains_key(&self.default_backend) {
            return Err(format!("default_backend `{}` is not defined under [backends]", self.default_backend));
        }
        for (name, entry) in &self.backends {
            match &entry.mock {
                Some(b) => {
                    b.parse::<MockBehavior>()?;
                }
                None => {
                    entry.http_config(name)?;
                }
            }
        }
        if let Some(e) = &self.embedding_backend {
            match self.backends.get(e) {
                Some(entry) if entry.mock.is_none() => {}
                _ => return Err(format!("embedding_backend `{e}` must name an HTTP backend")),
            }
        }
        if self.service.port == 0 {
            return Err("service.port must be in [1, 65535]".into());
        }
        self.synthesis.validate()?;
        self.split.validate()?;
        Ok(())
    }

    pub fn engine(&self) -> Result<CtqrsEngine, String> {
        let mut lex = Lexicons::default();
        for dir in &self.lexicon_paths {
            lex.overlay_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        }
        Ok(CtqrsEngine::new(lex))
    }

    /// Resolves a backend by name, falling back to the default backend.
    pub fn backend(&self, name: Option<&str>) -> Result<ResolvedBackend, String> {
        let name = name.unwrap_or(&self.default_backend);
        if let Some(behavior) = name.strip_prefix(MOCK_PREFIX) {
            return Ok(ResolvedBackend::mock(name, behavior.parse()?));
        }
        let entry = self.backends.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.backends.keys().map(String::as_str).collect();
            format!("unknown backend `{name}` (configured: {})", known.join(", "))
        })?;
        match &entry.mock {
            Some(b) => Ok(ResolvedBackend::mock(name, b.parse()?)),
            None => {
                let http = entry.http_backend(name)?;
                let workers = http.config().max_concurrency;
                Ok(ResolvedBackend { name: name.to_owned(), chat: Arc::new(http), max_concurrency: workers })
            }
        }
    }

    pub fn embedder(&self) -> Result<Arc<dyn EmbeddingProvider>, String> {
        let Some(name) = &self.embedding_backend else {
            return Ok(Arc::new(HashedBagEmbedder));
        };
        Ok(Arc::new(self.backends[name].http_backend(name)?))
    }
}

#[derive(Clone)]
pub struct ResolvedBackend {
    pub name: String,
    pub chat: Arc<dyn ChatBackend>,
    pub max_concurrency: usize,
}

impl ResolvedBackend {
    fn mock(name: &str, behavior: MockBehavior) -> Self {
        Self { name: name.to_owned(), chat: Arc::new(MockBackend::named(name, behavior)), max_concurrency: 4 }
    }
}
