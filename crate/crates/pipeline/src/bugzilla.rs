//! Bugzilla REST client: paged search for fixed bugs plus their comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use reqwest::Url;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use reportsmith_core::metrics::ProviderError;
use reportsmith_core::par;

pub const API_KEY_ENV: &str = "REPORTSMITH_BUGZILLA_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: u64,
    pub author: String,
    pub created: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugzillaBug {
    pub bug_id: u64,
    pub status: String,
    pub resolution: String,
    pub comments: Vec<Comment>,
    /// priority, severity, product, component, summary
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl BugzillaBug {
    /// Comment 0 carries the report itself.
    pub fn description(&self) -> &str {
        self.comments.first().map_or("", |c| c.text.as_str())
    }

    pub fn summary(&self) -> Option<&str> {
        self.meta.get("summary").map(String::as_str)
    }
}

/// Resume point for a paged search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cursor {
    pub last_change_time: String,
    pub offset: usize,
}

impl Cursor {
    pub fn load(path: &Path) -> std::io::Result<Option<Self>> {
        match std::fs::read_to_string(path) {
            Ok(s) => serde_json::from_str(&s)
                .map(Some)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(tmp, path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialFetch {
    pub fetched: Vec<BugzillaBug>,
    pub cursor: Cursor,
    pub cause: ProviderError,
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("fetch interrupted after {} bugs: {}", .0.fetched.len(), .0.cause)]
    Partial(Box<PartialFetch>),
    #[error("cursor file: {0}")]
    Cursor(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub base_url: String,
    /// Bugzilla has no single "closed and fixed" state; both count by default.
    pub statuses: Vec<String>,
    pub resolution: String,
    pub page_size: usize,
    /// Concurrent comment fetches.
    pub concurrency: usize,
    /// Minimum spacing between any two requests.
    pub min_interval: Duration,
    pub timeout: Duration,
    pub cursor_path: Option<PathBuf>,
}

impl FetchConfig {
    pub fn new(base_url: &str) -> Self {
        Self {
            base_url: base_url.trim_end_matches('/').to_owned(),
            statuses: vec!["RESOLVED".into(), "VERIFIED".into()],
            resolution: "FIXED".into(),
            page_size: 100,
            concurrency: 4,
            min_interval: Duration::from_millis(100),
            timeout: Duration::from_secs(30),
            cursor_path: None,
        }
    }
}

/// Spaces requests at least `interval` apart across threads.
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(interval: Duration) -> Self {
        Self { interval, next: Mutex::new(None) }
    }

    pub fn wait(&self) {
        if self.interval.is_zero() {
            return;
        }
        let slot = {
            let mut next = self.next.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

struct Session<'a> {
    cfg: &'a FetchConfig,
    client: Client,
    limiter: RateLimiter,
    api_key: Option<String>,
}

impl Session<'_> {
    fn get(&self, url: Url) -> Result<Value, ProviderError> {
        self.limiter.wait();
        let mut req = self.client.get(url);
        if let Some(key) = &self.api_key {
            req = req.header("X-BUGZILLA-API-KEY", key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                ProviderError::TimedOut
            } else {
                ProviderError::Unavailable(e.to_string())
            }
        })?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(ProviderError::AuthFailed);
        }
        if !status.is_success() {
            return Err(ProviderError::Unavailable(format!("HTTP {status}")));
        }
        resp.json().map_err(|e| ProviderError::Unavailable(format!("bad JSON: {e}")))
    }

    fn url(&self, path: &str) -> Result<Url, ProviderError> {
        Url::parse(&format!("{}{path}", self.cfg.base_url))
            .map_err(|e| ProviderError::Unavailable(format!("bad URL: {e}")))
    }

    fn search_page(&self, since: &str, offset: usize, limit: usize) -> Result<Vec<BugzillaBug>, ProviderError> {
        let mut url = self.url("/rest/bug")?;
        {
            let mut q = url.query_pairs_mut();
            for s in &self.cfg.statuses {
                q.append_pair("status", s);
            }
            q.append_pair("resolution", &self.cfg.resolution)
                .append_pair("last_change_time", since)
                .append_pair("order", "bug_id")
                .append_pair("limit", &limit.to_string())
                .append_pair("offset", &offset.to_string())
                .append_pair(
                    "include_fields",
                    "id,summary,status,resolution,priority,severity,product,component",
                );
        }
        let body = self.get(url)?;
        let bugs = body
            .get("bugs")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Unavailable("search response lacks `bugs`".into()))?;
        Ok(bugs.iter().filter_map(bug_header).collect())
    }

    fn comments(&self, bug_id: u64) -> Result<Vec<Comment>, ProviderError> {
        let body = self.get(self.url(&format!("/rest/bug/{bug_id}/comment"))?)?;
        let list = body
            .get("bugs")
            .and_then(|b| b.get(bug_id.to_string()))
            .and_then(|b| b.get("comments"))
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::Unavailable(format!("no comments for bug {bug_id}")))?;
        Ok(list
            .iter()
            .map(|c| Comment {
                comment_id: c.get("id").and_then(Value::as_u64).unwrap_or(0),
                author: str_field(c, "creator"),
                created: str_field(c, "creation_time"),
                text: str_field(c, "text"),
            })
            .collect())
    }
}

fn str_field(v: &Value, key: &str) -> String {
    v.get(key).and_then(Value::as_str).unwrap_or("").to_owned()
}

fn bug_header(v: &Value) -> Option<BugzillaBug> {
    let bug_id = v.get("id")?.as_u64()?;
    let meta = ["priority", "severity", "product", "component", "summary"]
        .iter()
        .filter_map(|k| v.get(*k).and_then(Value::as_str).map(|s| (k.to_string(), s.to_owned())))
        .collect();
    Some(BugzillaBug {
        bug_id,
        status: str_field(v, "status"),
        resolution: str_field(v, "resolution"),
        comments: Vec::new(),
        meta,
    })
}

/// Pages through fixed bugs changed since `since`, fetching each bug's
/// comments, until `limit` bugs are collected or the search runs dry.
///
/// With a cursor file configured, a run resumes from the stored offset when
/// `since` matches, and the cursor is advanced after every bug. Bugs without
/// comments are skipped. A failure before any bug arrived is a plain provider
/// error; later failures return what was fetched plus the cursor.
pub fn fetch_fixed_bugs(cfg: &FetchConfig, since: &str, limit: usize) -> Result<Vec<BugzillaBug>, FetchError> {
    let mut cursor = Cursor { last_change_time: since.to_owned(), offset: 0 };
    if let Some(path) = &cfg.cursor_path {
        if let Some(saved) = Cursor::load(path)? {
            if saved.last_change_time == since {
                cursor = saved;
            }
        }
    }
    if limit == 0 {
        return Ok(Vec::new());
    }
    let client = Client::builder()
        .timeout(cfg.timeout)
        .build()
        .map_err(|e| ProviderError::Unavailable(e.to_string()))?;
    let session = Session {
        cfg,
        client,
        limiter: RateLimiter::new(cfg.min_interval),
        api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
    };

    let mut out: Vec<BugzillaBug> = Vec::new();
    let fail = |out: Vec<BugzillaBug>, cursor: Cursor, cause: ProviderError| -> FetchError {
        if let Some(path) = &cfg.cursor_path {
            if let Err(e) = cursor.save(path) {
                return FetchError::Cursor(e);
            }
        }
        if out.is_empty() {
            return FetchError::Provider(cause);
        }
        FetchError::Partial(Box::new(PartialFetch { fetched: out, cursor, cause }))
    };

    while out.len() < limit {
        let want = cfg.page_size.max(1).min(limit - out.len());
        let page = match session.search_page(since, cursor.offset, want) {
            Ok(p) => p,
            Err(e) => return Err(fail(out, cursor, e)),
        };
        let page_len = page.len();
        let results = par::map_bounded(&page, cfg.concurrency.max(1), |bug| session.comments(bug.bug_id));
        for (mut bug, comments) in page.into_iter().zip(results) {
            match comments {
                Ok(c) => {
                    cursor.offset += 1;
                    if !c.is_empty() {
                        bug.comments = c;
                        out.push(bug);
                    }
                }
                Err(e) => return Err(fail(out, cursor, e)),
            }
        }
        if let Some(path) = &cfg.cursor_path {
            cursor.save(path)?;
        }
        if page_len < want {
            break;
        }
    }
    Ok(out)
}
