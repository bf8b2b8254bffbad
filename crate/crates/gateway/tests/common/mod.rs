//! Local OpenAI-compatible fixture server.

use std::collections::VecDeque;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

#[derive(Default)]
pub struct Script {
    /// Statuses to return before answering normally.
    pub failures: Mutex<VecDeque<StatusCode>>,
    pub delay: Duration,
    pub in_flight: AtomicUsize,
    pub peak: AtomicUsize,
    pub hits: AtomicUsize,
    pub last_auth: Mutex<Option<String>>,
}

impl Script {
    pub fn failing(statuses: &[u16]) -> Self {
        Self {
            failures: Mutex::new(statuses.iter().map(|s| StatusCode::from_u16(*s).unwrap()).collect()),
            ..Self::default()
        }
    }
}

async fn chat(
    State(s): State<Arc<Script>>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    s.hits.fetch_add(1, Ordering::SeqCst);
    *s.last_auth.lock().unwrap() =
        headers.get("authorization").map(|h| h.to_str().unwrap().to_owned());
    let now = s.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    s.peak.fetch_max(now, Ordering::SeqCst);
    if !s.delay.is_zero() {
        tokio::time::sleep(s.delay).await;
    }
    s.in_flight.fetch_sub(1, Ordering::SeqCst);
    if let Some(status) = s.failures.lock().unwrap().pop_front() {
        return (status, Json(json!({"error": "scripted"})));
    }
    // Echo the last message back as the completion.
    let content = body["messages"].as_array().and_then(|m| m.last()).map(|m| m["content"].clone());
    (
        StatusCode::OK,
        Json(json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]})),
    )
}

async fn embeddings(State(s): State<Arc<Script>>, Json(body): Json<Value>) -> Json<Value> {
    s.hits.fetch_add(1, Ordering::SeqCst);
    let n = body["input"].as_str().unwrap_or("").len() as f64;
    Json(json!({"data": [{"index": 0, "embedding": [n, 1.0, 0.0]}]}))
}

/// Serves the script on an ephemeral port; returns the base URL.
pub fn serve(script: Arc<Script>) -> String {
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new()
                .route("/v1/chat/completions", post(chat))
                .route("/v1/embeddings", post(embeddings))
                .with_state(script);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}
