//! OpenAI-compatible HTTP backend.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Serialize;
use serde_json::{json, Value};

use reportsmith_core::metrics::{EmbeddingProvider, ProviderError};

use crate::config::BackendConfig;
use crate::generation::GenerationResult;
use crate::prompt::ChatMessage;

/// First-choice content of a chat completion plus call telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub content: String,
    pub retry_count: u32,
    pub latency: Duration,
}

pub trait ChatBackend: Send + Sync {
    fn name(&self) -> &str;

    fn chat_complete(&self, messages: &[ChatMessage]) -> Result<Completion, ProviderError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn chat_complete(&self, messages: &[ChatMessage]) -> Result<Completion, ProviderError> {
        (**self).chat_complete(messages)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn chat_complete(&self, messages: &[ChatMessage]) -> Result<Completion, ProviderError> {
        (**self).chat_complete(messages)
    }
}

/// Calls the backend and parses its answer. Provider failures propagate;
/// parse failures are recorded in the result.
pub fn generate(
    backend: &dyn ChatBackend,
    messages: &[ChatMessage],
) -> Result<GenerationResult, ProviderError> {
    let c = backend.chat_complete(messages)?;
    Ok(GenerationResult::from_raw(c.content, c.latency, c.retry_count))
}

/// Retries on timeouts and 5xx only, doubling the delay each time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_retries: 3, base_delay: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * 2u32.pow(retry)
    }
}

/// Counting semaphore bounding in-flight requests.
struct Semaphore {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TelemetrySnapshot {
    pub requests: u64,
    pub retries: u64,
    pub failures: u64,
}

#[derive(Default)]
struct Telemetry {
    requests: AtomicU64,
    retries: AtomicU64,
    failures: AtomicU64,
}

enum Attempt {
    Done(Value),
    Transient(ProviderError),
    Fatal(ProviderError),
}

pub struct HttpBackend {
    config: BackendConfig,
    retry: RetryPolicy,
    client: OnceLock<Client>,
    permits: Semaphore,
    telemetry: Telemetry,
}

impl HttpBackend {
    /// The HTTP client is created on first use, so a handle may be built
    /// from any context.
    pub fn new(config: BackendConfig) -> Result<Self, crate::config::ConfigError> {
        config.validate()?;
        Ok(Self {
            permits: Semaphore::new(config.max_concurrency),
            config,
            retry: RetryPolicy::default(),
            client: OnceLock::new(),
            telemetry: Telemetry::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn telemetry(&self) -> TelemetrySnapshot {
        TelemetrySnapshot {
            requests: self.telemetry.requests.load(Ordering::Relaxed),
            retries: self.telemetry.retries.load(Ordering::Relaxed),
            failures: self.telemetry.failures.load(Ordering::Relaxed),
        }
    }

    fn client(&self) -> Result<&Client, ProviderError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let built = Client::builder()
            .timeout(self.config.timeout())
            .build()
            .map_err(|e| ProviderError::Unavailable(format!("http client: {e}")))?;
        Ok(self.client.get_or_init(|| built))
    }

    fn attempt(&self, url: &str, body: &Value) -> Attempt {
        let client = match self.client() {
            Ok(c) => c,
            Err(e) => return Attempt::Fatal(e),
        };
        let _permit = self.permits.acquire();
        self.telemetry.requests.fetch_add(1, Ordering::Relaxed);
        let mut req = client.post(url).json(body);
        if let Some(key) = self.config.api_key() {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Transient(ProviderError::TimedOut),
            Err(e) => return Attempt::Fatal(ProviderError::Unavailable(e.to_string())),
        };
        let status = resp.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Attempt::Fatal(ProviderError::AuthFailed);
        }
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Transient(ProviderError::TimedOut),
            Err(e) => return Attempt::Fatal(ProviderError::Unavailable(e.to_string())),
        };
        if status.is_server_error() {
            return Attempt::Transient(ProviderError::Unavailable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Attempt::Fatal(ProviderError::Unavailable(format!("HTTP {status}: {text}")));
        }
        match serde_json::from_str(&text) {
            Ok(v) => Attempt::Done(v),
            Err(e) => Attempt::Fatal(ProviderError::Unavailable(format!("bad response body: {e}"))),
        }
    }

    /// POSTs `body`, retrying per policy. Returns the JSON reply and the
    /// number of retries spent.
    fn post(&self, path: &str, body: &Value) -> Result<(Value, u32), ProviderError> {
        let url = self.config.endpoint(path);
        let mut retries = 0;
        loop {
            match self.attempt(&url, body) {
                Attempt::Done(v) => return Ok((v, retries)),
                Attempt::Transient(_) if retries < self.retry.max_retries => {
                    std::thread::sleep(self.retry.delay(retries));
                    retries += 1;
                    self.telemetry.retries.fetch_add(1, Ordering::Relaxed);
                }
                Attempt::Transient(e) | Attempt::Fatal(e) => {
                    self.telemetry.failures.fetch_add(1, Ordering::Relaxed);
                    return Err(e);
                }
            }
        }
    }
}

fn first_choice(v: &Value) -> Option<&str> {
    v.get("choices")?.get(0)?.get("message")?.get("content")?.as_str()
}

impl ChatBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.config.name
    }

    fn chat_complete(&self, messages: &[ChatMessage]) -> Result<Completion, ProviderError> {
        let started = Instant::now();
        let body = json!({
            "model": self.config.model_id,
            "messages": messages,
            "temperature": self.config.temperature,
        });
        let (reply, retry_count) = self.post("chat/completions", &body)?;
        let content = first_choice(&reply)
            .ok_or_else(|| ProviderError::Unavailable("response has no choices[0].message.content".into()))?;
        Ok(Completion { content: content.to_owned(), retry_count, latency: started.elapsed() })
    }
}

impl EmbeddingProvider for HttpBackend {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let model = self.config.embedding_model.as_deref().unwrap_or(&self.config.model_id);
        let (reply, _) = self.post("embeddings", &json!({ "model": model, "input": text }))?;
        reply
            .get("data")
            .and_then(|d| d.get(0))
            .and_then(|d| d.get("embedding"))
            .and_then(Value::as_array)
            .and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
            .ok_or_else(|| ProviderError::Unavailable("response has no data[0].embedding".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(
            (0..3).map(|i| p.delay(i).as_secs()).collect::<Vec<_>>(),
            [1, 2, 4]
        );
    }

    #[test]
    fn semaphore_caps_holders() {
        let sem = Arc::new(Semaphore::new(2));
        let live = Arc::new(AtomicU64::new(0));
        let peak = Arc::new(AtomicU64::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (sem, live, peak) = (sem.clone(), live.clone(), peak.clone());
                std::thread::spawn(move || {
                    let _p = sem.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(10));
                    live.fetch_sub(1, Ordering::SeqCst);
                })
            })
            .collect();
        handles.into_iter().for_each(|h| h.join().unwrap());
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
