use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::get;
use axum::{Json, Router};
use serde_json::{json, Value};

use reportsmith_pipeline::{fetch_fixed_bugs, Cursor, FetchConfig, FetchError};

struct Server {
    total: u64,
    /// Comment requests for this bug id fail with 500 while set.
    fail_on: Mutex<Option<u64>>,
    queries: Mutex<Vec<HashMap<String, String>>>,
    comment_hits: AtomicUsize,
}

async fn search(State(s): State<Arc<Server>>, Query(q): Query<HashMap<String, String>>) -> Json<Value> {
    let offset: u64 = q["offset"].parse().unwrap();
    let limit: u64 = q["limit"].parse().unwrap();
    s.queries.lock().unwrap().push(q);
    let bugs: Vec<Value> = (offset..(offset + limit).min(s.total))
        .map(|i| {
            let id = 100 + i;
            json!({"id": id, "summary": format!("Bug {id}"), "status": "RESOLVED", "resolution": "FIXED",
                   "priority": "P2", "severity": "normal", "product": "Core", "component": "DOM"})
        })
        .collect();
    Json(json!({ "bugs": bugs }))
}

async fn comments(State(s): State<Arc<Server>>, Path(id): Path<u64>) -> (StatusCode, Json<Value>) {
    s.comment_hits.fetch_add(1, Ordering::SeqCst);
    if *s.fail_on.lock().unwrap() == Some(id) {
        return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": true})));
    }
    let body = json!({ "bugs": { id.to_string(): { "comments": [
        {"id": id * 10, "creator": "a@example.com", "creation_time": "2024-01-01T00:00:00Z", "text": format!("description of {id}"), "count": 0},
        {"id": id * 10 + 1, "creator": "b@example.com", "creation_time": "2024-01-02T00:00:00Z", "text": "fixed", "count": 1}
    ]}}, "comments": {} });
    (StatusCode::OK, Json(body))
}

fn serve(server: Arc<Server>) -> String {
    let (tx, rx) = std::sync::mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        tokio::runtime::Runtime::new().unwrap().block_on(async move {
            let app = Router::new()
                .route("/rest/bug", get(search))
                .route("/rest/bug/{id}/comment", get(comments))
                .with_state(server);
            let l = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(l.local_addr().unwrap()).unwrap();
            axum::serve(l, app).await.unwrap();
        })
    });
    format!("http://{}", rx.recv().unwrap())
}

fn server(total: u64) -> Arc<Server> {
    Arc::new(Server {
        total,
        fail_on: Mutex::new(None),
        queries: Mutex::new(Vec::new()),
        comment_hits: AtomicUsize::new(0),
    })
}

fn config(url: &str) -> FetchConfig {
    let mut cfg = FetchConfig::new(url);
    cfg.min_interval = Duration::ZERO;
    cfg.page_size = 2;
    cfg
}

#[test]
fn three_recorded_bugs() {
    let s = server(3);
    let url = serve(s.clone());
    let bugs = fetch_fixed_bugs(&config(&url), "2024-01-01", 10).unwrap();
    assert_eq!(bugs.len(), 3);
    for (i, b) in bugs.iter().enumerate() {
        assert_eq!(b.bug_id, 100 + i as u64);
        assert_eq!(b.description(), format!("description of {}", b.bug_id));
        assert_eq!(b.comments.len(), 2);
        assert_eq!(b.meta["severity"], "normal");
    }
    let queries = s.queries.lock().unwrap();
    assert_eq!(queries.len(), 2);
    assert_eq!(queries[0]["resolution"], "FIXED");
    assert_eq!(queries[0]["last_change_time"], "2024-01-01");
    assert_eq!(queries[1]["offset"], "2");
}

#[test]
fn zero_limit_makes_no_requests() {
    let s = server(3);
    let url = serve(s.clone());
    assert!(fetch_fixed_bugs(&config(&url), "2024-01-01", 0).unwrap().is_empty());
    assert!(s.queries.lock().unwrap().is_empty());
}

#[test]
fn limit_caps_results() {
    let url = serve(server(50));
    assert_eq!(fetch_fixed_bugs(&config(&url), "2024-01-01", 5).unwrap().len(), 5);
}

#[test]
fn mid_run_500_yields_resumable_partial_fetch() {
    let s = server(6);
    *s.fail_on.lock().unwrap() = Some(103);
    let url = serve(s.clone());
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&url);
    cfg.cursor_path = Some(dir.path().join("cursor.json"));

    let partial = match fetch_fixed_bugs(&cfg, "2024-01-01", 10) {
        Err(FetchError::Partial(p)) => p,
        other => panic!("{other:?}"),
    };
    assert_eq!(partial.fetched.iter().map(|b| b.bug_id).collect::<Vec<_>>(), [100, 101, 102]);
    assert_eq!(partial.cursor, Cursor { last_change_time: "2024-01-01".into(), offset: 3 });
    assert_eq!(Cursor::load(cfg.cursor_path.as_ref().unwrap()).unwrap(), Some(partial.cursor.clone()));

    *s.fail_on.lock().unwrap() = None;
    let rest = fetch_fixed_bugs(&cfg, "2024-01-01", 10).unwrap();
    assert_eq!(rest.iter().map(|b| b.bug_id).collect::<Vec<_>>(), [103, 104, 105]);
}

#[test]
fn unreachable_server_is_provider_error() {
    let cfg = config("http://127.0.0.1:9");
    assert!(matches!(fetch_fixed_bugs(&cfg, "2024-01-01", 3), Err(FetchError::Provider(_))));
}
