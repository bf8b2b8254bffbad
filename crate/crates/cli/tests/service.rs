use std::net::SocketAddr;
use std::sync::{mpsc, Arc};
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use reportsmith_cli::config::AppConfig;
use reportsmith_cli::service::{router, AppState};
use reportsmith_core::fixtures::{golden_g1, PRINT_PREVIEW};
use reportsmith_core::{parse_sections, render_report, report_to_json, SectionKind};

/// Starts the API on an ephemeral port. The runtime thread never exits, so
/// the state is never dropped on an async worker.
fn start(cfg: AppConfig) -> String {
    let state = Arc::new(AppState::new(cfg).unwrap());
    start_router(router(state))
}

fn start_router(app: axum::Router) -> String {
    let (tx, rx) = mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn client() -> Client {
    Client::builder().timeout(Duration::from_secs(30)).build().unwrap()
}

fn post(base: &str, path: &str, body: &Value) -> (StatusCode, Value) {
    let r = client().post(format!("{base}{path}")).json(body).send().unwrap();
    let status = r.status();
    (status, r.json().unwrap())
}

#[test]
fn score_endpoint() {
    let base = start(AppConfig::default());
    let (s, v) = post(&base, "/api/score", &json!({ "text": PRINT_PREVIEW }));
    assert_eq!(s, StatusCode::OK);
    assert!(v["breakdown"]["total"].as_u64().unwrap() >= 14);
    assert!(v["report"].is_object());
    assert!(v["missing_fields"].is_array());

    let (s, v) = post(&base, "/api/score", &json!({ "text": "   " }));
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].is_string());

    let r = client()
        .post(format!("{base}/api/score"))
        .header("content-type", "application/json")
        .body("{not json")
        .send()
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);
    let (s, _) = post(&base, "/api/score", &json!({ "txt": "x" }));
    assert_eq!(s, StatusCode::BAD_REQUEST);

    let r = client().get(format!("{base}/api/nowhere")).send().unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}

#[test]
fn breakdown_bytes_match_cli() {
    #[derive(serde::Deserialize)]
    struct Raw {
        breakdown: Box<serde_json::value::RawValue>,
    }
    let base = start(AppConfig::default());
    let text = client()
        .post(format!("{base}/api/score"))
        .json(&json!({ "text": PRINT_PREVIEW }))
        .send()
        .unwrap()
        .text()
        .unwrap();
    let raw: Raw = serde_json::from_str(&text).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("r.txt");
    std::fs::write(&f, PRINT_PREVIEW).unwrap();
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_reportsmith"))
        .env_remove("REPORTSMITH_CONFIG")
        .arg("score")
        .arg(&f)
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), raw.breakdown.get());
}

#[test]
fn structure_endpoint() {
    let base = start(AppConfig::default());
    let mut gold = golden_g1();
    gold.clear_section(SectionKind::ActualResult);
    let text = render_report(&gold);

    let (s, v) = post(&base, "/api/structure", &json!({ "text": text }));
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["backend"], "mock");
    let expected: Value = serde_json::from_str(&report_to_json(&parse_sections(&text))).unwrap();
    assert_eq!(v["report"], expected);
    assert_eq!(v["missing_fields"], json!(["actual_result"]));
    assert_eq!(v["parse_error"], Value::Null);
    assert_eq!(v["rendered"].as_str().unwrap(), render_report(&parse_sections(&text)));

    let (s, v) = post(&base, "/api/structure", &json!({ "text": text, "backend": "mock:echo", "shots": 2 }));
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["report"], Value::Null);
    assert!(v["parse_error"].is_string());

    let (s, _) = post(&base, "/api/structure", &json!({ "text": text, "backend": "ghost" }));
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = post(&base, "/api/structure", &json!({ "text": "" }));
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[test]
fn metrics_and_health() {
    let base = start(AppConfig::default());
    let (s, v) = post(&base, "/api/metrics", &json!({ "candidate": "a b", "reference": "a c" }));
    assert_eq!(s, StatusCode::OK);
    assert!((v["cosine_tf"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((v["rouge1"]["f"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!(v["embedding_similarity"].is_number());

    let (s, v) = post(&base, "/api/metrics", &json!({ "candidate": "a" }));
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].is_string());

    let v: Value = client().get(format!("{base}/api/health")).send().unwrap().json().unwrap();
    assert_eq!(v["status"], "ok");
    assert_eq!(v["default_backend"], "mock");
    assert_eq!(v["backends"], json!(["mock"]));
    assert!(v["rule_table"].is_string());
}

#[test]
fn cors_allows_configured_origin() {
    let cfg = AppConfig::parse("[service]\nallowed_origins = [\"http://localhost:5173\"]\n").unwrap();
    let base = start(cfg);
    let r = client()
        .get(format!("{base}/api/health"))
        .header("origin", "http://localhost:5173")
        .send()
        .unwrap();
    assert_eq!(r.headers()["access-control-allow-origin"], "http://localhost:5173");
    let r = client().get(format!("{base}/api/health")).header("origin", "http://evil.test").send().unwrap();
    assert!(r.headers().get("access-control-allow-origin").is_none());
}

#[test]
fn provider_failures_map_to_gateway_statuses() {
    let slow = start_router(axum::Router::new().route(
        "/v1/chat/completions",
        axum::routing::post(|| async {
            tokio::time::sleep(Duration::from_secs(3)).await;
            "{}"
        }),
    ));
    let cfg = AppConfig::parse(&format!(
        "[backends.mock]\nmock = \"perfect_extractor\"\n\
         [backends.down]\nbase_url = \"http://127.0.0.1:9\"\nmodel_id = \"m\"\nmax_retries = 0\n\
         [backends.slow]\nbase_url = \"{slow}\"\nmodel_id = \"m\"\ntimeout = 0.2\nmax_retries = 0\n"
    ))
    .unwrap();
    let base = start(cfg);
    let (s, v) = post(&base, "/api/structure", &json!({ "text": PRINT_PREVIEW, "backend": "down" }));
    assert_eq!(s, StatusCode::BAD_GATEWAY, "{v}");
    let (s, v) = post(&base, "/api/structure", &json!({ "text": PRINT_PREVIEW, "backend": "slow" }));
    assert_eq!(s, StatusCode::GATEWAY_TIMEOUT, "{v}");
}
