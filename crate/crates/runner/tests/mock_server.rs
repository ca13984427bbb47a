use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use formbench_core::bench::{read_predictions, PredictionRecord, RunConfig};
use formbench_core::client::{ChatMessage, ChatRequest, Role};
use formbench_runner::{run_benchmark, OpenAiClient, RunItem};
use serde_json::{json, Value};

#[derive(Clone, Default)]
struct Seen(Arc<Mutex<Vec<String>>>);

async fn completions(State(seen): State<Seen>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let doc = body["messages"][1]["content"].as_str().unwrap_or_default().to_string();
    seen.0.lock().unwrap().push(doc.clone());
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["response_format"]["type"], "json_object");
    if doc.contains("FAIL") {
        return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": "boom"})));
    }
    let content = json!({"echo": doc}).to_string();
    (StatusCode::OK, Json(json!({"choices": [{"message": {"role": "assistant", "content": content}}]})))
}

async fn serve() -> (String, Seen) {
    let seen = Seen::default();
    let app = Router::new().route("/v1/chat/completions", post(completions)).with_state(seen.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1/chat/completions"), seen)
}

fn config(endpoint: String) -> RunConfig {
    RunConfig { endpoint, model: "mock".into(), backoff_base_ms: 1, parallelism: 2, ..RunConfig::default() }
}

fn items(ids: &[&str]) -> Vec<RunItem> {
    ids.iter()
        .map(|id| RunItem {
            doc_id: id.to_string(),
            request: ChatRequest::new(vec![
                ChatMessage::text(Role::System, "extract"),
                ChatMessage::text(Role::User, format!("text of {id}")),
            ]),
        })
        .collect()
}

fn records(path: &std::path::Path) -> Vec<PredictionRecord> {
    read_predictions(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn echo_three_documents() {
    let (endpoint, seen) = serve().await;
    let cfg = config(endpoint);
    let client = OpenAiClient::new(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pred.jsonl");
    let summary = run_benchmark(&client, &cfg, items(&["c", "a", "b"]), &out, false).await.unwrap();
    assert_eq!(summary.requested, 3);
    assert!(summary.failed.is_empty());
    let recs = records(&out);
    assert_eq!(recs.iter().map(|r| r.doc_id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
    assert_eq!(recs[0].modality, "spatial");
    let parsed: Value = serde_json::from_str(&recs[1].raw_output).unwrap();
    assert_eq!(parsed["echo"], "text of b");
    assert_eq!(seen.0.lock().unwrap().len(), 3);
}

#[tokio::test(flavor = "multi_thread")]
async fn resume_requests_only_missing() {
    let (endpoint, seen) = serve().await;
    let cfg = config(endpoint);
    let client = OpenAiClient::new(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pred.jsonl");
    run_benchmark(&client, &cfg, items(&["a", "b"]), &out, false).await.unwrap();
    let summary = run_benchmark(&client, &cfg, items(&["a", "b", "c", "d"]), &out, true).await.unwrap();
    assert_eq!((summary.requested, summary.skipped), (2, 2));
    let seen = seen.0.lock().unwrap().clone();
    assert_eq!(seen.len(), 4);
    assert!(seen[2..].iter().all(|d| d == "text of c" || d == "text of d"));

    let fresh = dir.path().join("fresh.jsonl");
    run_benchmark(&client, &cfg, items(&["a", "b", "c", "d"]), &fresh, false).await.unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&fresh).unwrap());
}

#[tokio::test(flavor = "multi_thread")]
async fn persistent_errors_record_empty_output() {
    let (endpoint, seen) = serve().await;
    let cfg = config(endpoint);
    let client = OpenAiClient::new(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pred.jsonl");
    let summary = run_benchmark(&client, &cfg, items(&["ok", "FAIL"]), &out, false).await.unwrap();
    assert_eq!(summary.failed, ["FAIL"]);
    let recs = records(&out);
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].doc_id, "FAIL");
    assert_eq!(recs[0].raw_output, "");
    let attempts = seen.0.lock().unwrap().iter().filter(|d| d.contains("FAIL")).count();
    assert_eq!(attempts, cfg.max_attempts as usize);
}

#[tokio::test(flavor = "multi_thread")]
async fn unreachable_endpoint_is_recorded_not_fatal() {
    let cfg = RunConfig { max_attempts: 2, ..config("http://127.0.0.1:9/v1/chat/completions".into()) };
    let client = OpenAiClient::new(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pred.jsonl");
    let summary = run_benchmark(&client, &cfg, items(&["a"]), &out, false).await.unwrap();
    assert_eq!(summary.failed, ["a"]);
}
