use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use amused_core::clock::FixedClock;
use amused_core::pipeline::{run_pipeline, RunConfig};
use amused_core::store::Store;
use amused_core::verification::{sample_for_review, ReviewQueue};
use amused_server::{bind, router, serve, ServeError};
use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chrono::{TimeZone, Utc};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tower::ServiceExt;

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/golden")
}

fn clock() -> FixedClock {
    FixedClock(Utc.with_ymd_and_hms(2021, 3, 1, 12, 0, 0).unwrap())
}

/// Expected task count at a 10% rate, from the generator's winner list.
fn expected_sample_size() -> usize {
    let text = std::fs::read_to_string(golden().join("expected/winners.json")).unwrap();
    let winners: Vec<Value> = serde_json::from_str(&text).unwrap();
    let mut per_platform: BTreeMap<String, usize> = BTreeMap::new();
    for w in winners {
        *per_platform
            .entry(w["platform"].as_str().unwrap().to_string())
            .or_default() += 1;
    }
    per_platform.values().map(|n| n.div_ceil(10)).sum()
}

fn sampled_queue(dir: &Path) -> Arc<ReviewQueue> {
    let mut config = RunConfig::load(&golden().join("run.json")).unwrap();
    config.store = dir.to_path_buf();
    run_pipeline(&config, &clock()).unwrap();
    let mut store = Store::open(dir).unwrap();
    sample_for_review(&mut store, 0.10, 7, &clock()).unwrap();
    Arc::new(ReviewQueue::new(store, Arc::new(clock())))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn counts(stats: &Value) -> (u64, u64, u64) {
    (
        stats["pending"].as_u64().unwrap(),
        stats["confirmed"].as_u64().unwrap(),
        stats["rejected"].as_u64().unwrap(),
    )
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn stats_next_and_verdict_flow() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(sampled_queue(dir.path()), None);
    let n = expected_sample_size() as u64;

    let (status, stats) = call(&app, "GET", "/api/stats", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(counts(&stats), (n, 0, 0));
    let by_platform: u64 = stats["by_platform"]
        .as_object()
        .unwrap()
        .values()
        .map(|c| c["pending"].as_u64().unwrap())
        .sum();
    assert_eq!(by_platform, n);

    let (status, task) = call(&app, "GET", "/api/tasks/next?reviewer=ana", None).await;
    assert_eq!(status, StatusCode::OK);
    let id = task["task"]["task_id"].as_str().unwrap().to_string();
    assert!(!task["article_title"].as_str().unwrap().is_empty());
    assert!(task["source_url"].as_str().unwrap().starts_with("https://"));
    assert!(task["post"]["text_content"].is_string());

    // Another reviewer cannot decide a task leased to ana.
    let uri = format!("/api/tasks/{id}/verdict");
    let (status, _) = call(
        &app,
        "POST",
        &uri,
        Some(json!({"verdict": "rejected", "reviewer": "ben"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, decided) = call(
        &app,
        "POST",
        &uri,
        Some(json!({"verdict": "rejected", "reviewer": "ana", "note": "wrong video"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(decided["verdict"], "rejected");
    assert_eq!(decided["note"], "wrong video");
    let (_, stats) = call(&app, "GET", "/api/stats", None).await;
    assert_eq!(counts(&stats), (n - 1, 0, 1));

    let (status, _) = call(
        &app,
        "POST",
        &uri,
        Some(json!({"verdict": "confirmed", "reviewer": "ana"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (_, stats) = call(&app, "GET", "/api/stats", None).await;
    assert_eq!(counts(&stats), (n - 1, 0, 1));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(sampled_queue(dir.path()), None);
    let (status, _) = call(&app, "GET", "/api/tasks/next", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, body) = call(
        &app,
        "POST",
        "/api/tasks/nope/verdict",
        Some(json!({"verdict": "confirmed", "reviewer": "ana"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("nope"));

    let (_, task) = call(&app, "GET", "/api/tasks/next?reviewer=ana", None).await;
    let uri = format!("/api/tasks/{}/verdict", task["task"]["task_id"].as_str().unwrap());
    for body in [
        json!({"verdict": "pending", "reviewer": "ana"}),
        json!({"verdict": "maybe", "reviewer": "ana"}),
        json!({"verdict": "confirmed"}),
        json!({"reviewer": "ana"}),
    ] {
        let (status, _) = call(&app, "POST", &uri, Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    }
    let (status, _) = call(&app, "GET", "/index.html", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn queue_drains_to_no_content() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(sampled_queue(dir.path()), None);
    let n = expected_sample_size();
    let mut seen = std::collections::HashSet::new();
    for _ in 0..n {
        let (status, task) = call(&app, "GET", "/api/tasks/next?reviewer=ana", None).await;
        assert_eq!(status, StatusCode::OK);
        assert!(seen.insert(task["task"]["task_id"].as_str().unwrap().to_string()));
    }
    let (status, body) = call(&app, "GET", "/api/tasks/next?reviewer=ana", None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert_eq!(body, Value::Null);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn concurrent_verdicts_on_one_task() {
    let dir = tempfile::tempdir().unwrap();
    let queue = sampled_queue(dir.path());
    let app = router(Arc::clone(&queue), None);
    let (_, task) = call(&app, "GET", "/api/tasks/next?reviewer=ana", None).await;
    let uri = format!("/api/tasks/{}/verdict", task["task"]["task_id"].as_str().unwrap());

    let mut handles = Vec::new();
    for i in 0..16 {
        let (app, uri) = (app.clone(), uri.clone());
        let verdict = if i % 2 == 0 { "confirmed" } else { "rejected" };
        handles.push(tokio::spawn(async move {
            call(&app, "POST", &uri, Some(json!({"verdict": verdict, "reviewer": "ana"})))
                .await
                .0
        }));
    }
    let mut statuses = Vec::new();
    for h in handles {
        statuses.push(h.await.unwrap());
    }
    assert_eq!(
        statuses.iter().filter(|s| **s == StatusCode::OK).count(),
        1,
        "{statuses:?}"
    );
    assert!(statuses
        .iter()
        .all(|s| *s == StatusCode::OK || *s == StatusCode::CONFLICT));

    let (_, stats) = call(&app, "GET", "/api/stats", None).await;
    let (p, c, r) = counts(&stats);
    assert_eq!(p + c + r, expected_sample_size() as u64);
    assert_eq!(c + r, 1);
    let verdict_entries = queue.with_store(|s| {
        s.audit()
            .iter()
            .filter(|e| matches!(e.event, amused_core::store::AuditEvent::Verdict { .. }))
            .count()
    });
    assert_eq!(verdict_entries, 1);
}

#[tokio::test]
async fn port_in_use() {
    let first = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = first.local_addr().unwrap();
    match bind(addr).await {
        Err(ServeError::PortInUse(port)) => assert_eq!(port, addr.port()),
        other => panic!("expected PortInUse, got {other:?}"),
    }
}

async fn raw_get(addr: std::net::SocketAddr, path: &str) -> String {
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n");
    stream.write_all(req.as_bytes()).await.unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).await.unwrap();
    out
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn serves_over_tcp_with_static_assets_and_shuts_down() {
    let dir = tempfile::tempdir().unwrap();
    let store_dir = dir.path().join("store");
    let queue = sampled_queue(&store_dir);
    let assets = dir.path().join("static");
    std::fs::create_dir_all(&assets).unwrap();
    std::fs::write(assets.join("index.html"), "<html>review</html>").unwrap();

    let listener = bind("127.0.0.1:0".parse().unwrap()).await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(async move {
        serve(listener, queue, Some(&assets), async {
            let _ = stopped.await;
        })
        .await
    });

    let stats = raw_get(addr, "/api/stats").await;
    assert!(stats.starts_with("HTTP/1.1 200"), "{stats}");
    assert!(stats.contains("\"pending\""));
    let index = raw_get(addr, "/").await;
    assert!(index.starts_with("HTTP/1.1 200"), "{index}");
    assert!(index.ends_with("<html>review</html>"));

    stop.send(()).unwrap();
    server.await.unwrap().unwrap();
    // The store on disk is complete after shutdown.
    let tasks = Store::open(&store_dir).unwrap().tasks().count();
    assert_eq!(tasks, expected_sample_size());
}
