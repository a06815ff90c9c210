//! Shared test support: the brute-force similarity oracle, a scriptable
//! OpenAI-compatible mock endpoint, and fixture helpers.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use medeval::QaRecord;

// ---------------------------------------------------------------------------
// Brute-force Ratcliff-Obershelp oracle, independent of the production path:
// the longest block comes from an exhaustive scan over every start pair, and
// the recursion is written directly over subslices.

/// Longest common contiguous block by exhaustive substring scan; ties keep
/// the first hit in (start_a, start_b) order. Start pairs that cannot beat
/// the best run found so far are skipped, which changes nothing about the
/// result because extending them is pointless by construction.
pub fn oracle_lcs<T: PartialEq>(a: &[T], b: &[T]) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    for i in 0..a.len() {
        if a.len() - i <= best.2 {
            break;
        }
        for j in 0..b.len() {
            if b.len() - j <= best.2 {
                break;
            }
            let mut len = 0;
            while i + len < a.len() && j + len < b.len() && a[i + len] == b[j + len] {
                len += 1;
            }
            if len > best.2 {
                best = (i, j, len);
            }
        }
    }
    best
}

/// Total matched elements: longest block plus recursion on both remainders.
pub fn oracle_match_total<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (i, j, len) = oracle_lcs(a, b);
    if len == 0 {
        return 0;
    }
    len + oracle_match_total(&a[..i], &b[..j]) + oracle_match_total(&a[i + len..], &b[j + len..])
}

/// 2M/T on characters, with the empty-empty convention of 1.
pub fn oracle_similarity(a: &str, b: &str) -> f64 {
    let av: Vec<char> = a.chars().collect();
    let bv: Vec<char> = b.chars().collect();
    let total = av.len() + bv.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * oracle_match_total(&av, &bv) as f64 / total as f64
}

// ---------------------------------------------------------------------------
// Mock endpoint

pub enum Reply {
    /// 200 with the text wrapped in the flavor's payload shape.
    Text(String),
    /// Error status with a plain body.
    Status(u16, String),
    /// 200 with this exact body (for malformed-payload tests).
    Raw(String),
}

pub type Responder = Arc<dyn Fn(usize, &str, &Value) -> Reply + Send + Sync>;

struct MockState {
    hits: Arc<AtomicUsize>,
    responder: Responder,
}

pub struct MockServer {
    pub base_url: String,
    hits: Arc<AtomicUsize>,
}

impl MockServer {
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn build_reply(reply: Reply, chat: bool) -> Response {
    match reply {
        Reply::Text(text) => {
            let payload = if chat {
                json!({"choices": [{"message": {"role": "assistant", "content": text}, "finish_reason": "stop"}]})
            } else {
                json!({"choices": [{"text": text, "finish_reason": "stop"}]})
            };
            Json(payload).into_response()
        }
        Reply::Status(code, body) => (
            StatusCode::from_u16(code).expect("valid status"),
            body,
        )
            .into_response(),
        Reply::Raw(body) => (
            [(axum::http::header::CONTENT_TYPE, "application/json")],
            body,
        )
            .into_response(),
    }
}

async fn completions(State(state): State<Arc<MockState>>, Json(body): Json<Value>) -> Response {
    let hit = state.hits.fetch_add(1, Ordering::SeqCst);
    let prompt = body["prompt"].as_str().unwrap_or_default().to_string();
    build_reply((state.responder)(hit, &prompt, &body), false)
}

async fn chat(State(state): State<Arc<MockState>>, Json(body): Json<Value>) -> Response {
    let hit = state.hits.fetch_add(1, Ordering::SeqCst);
    let prompt = body["messages"][0]["content"].as_str().unwrap_or_default().to_string();
    build_reply((state.responder)(hit, &prompt, &body), true)
}

/// Starts a mock server on an ephemeral port inside the current tokio
/// runtime. It serves until the runtime shuts down.
pub async fn start_mock(responder: Responder) -> MockServer {
    let hits = Arc::new(AtomicUsize::new(0));
    let state = Arc::new(MockState {
        hits: Arc::clone(&hits),
        responder,
    });
    let app = Router::new()
        .route("/v1/completions", post(completions))
        .route("/v1/chat/completions", post(chat))
        .with_state(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .expect("bind mock listener");
    let addr = listener.local_addr().expect("local addr");
    tokio::spawn(async move {
        axum::serve(listener, app).await.expect("mock serves");
    });
    MockServer {
        base_url: format!("http://{addr}"),
        hits,
    }
}

/// Responder that looks up which fixture question the prompt contains and
/// replies with the scripted text for that item.
pub fn scripted_responder(script: Vec<(String, String)>) -> Responder {
    Arc::new(move |_hit, prompt, _body| {
        for (question, reply) in &script {
            if prompt.contains(question.as_str()) {
                return Reply::Text(reply.clone());
            }
        }
        Reply::Status(500, "no scripted reply matches the prompt".to_string())
    })
}

/// Responder that fails the first `n` requests with `status`, then
/// succeeds with `text`.
pub fn fail_n_then(n: usize, status: u16, text: &str) -> Responder {
    let text = text.to_string();
    Arc::new(move |hit, _prompt, _body| {
        if hit < n {
            Reply::Status(status, "scripted failure".to_string())
        } else {
            Reply::Text(text.clone())
        }
    })
}

// ---------------------------------------------------------------------------
// Fixtures

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture_path(name: &str) -> PathBuf {
    workspace_root().join("fixtures").join(name)
}

pub fn load_fixture(name: &str) -> Vec<QaRecord> {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).expect("fixture line parses"))
        .collect()
}

/// Scripts gold-verbatim replies for the first `correct` fixture items and
/// a wrong choice (verbatim) for the rest.
pub fn gold_or_wrong_script(records: &[QaRecord], correct: usize) -> Vec<(String, String)> {
    records
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let reply = if i < correct {
                record.gold_answer_text()
            } else {
                let wrong = (0..record.choices.len())
                    .find(|idx| !record.gold.contains(idx))
                    .expect("record has a wrong choice");
                record.choices[wrong].clone()
            };
            (record.question.clone(), reply)
        })
        .collect()
}

/// Writes a minimal run config pointing at one fixture benchmark.
#[allow(clippy::too_many_arguments)]
pub fn write_run_config(
    dir: &Path,
    base_url: &str,
    benchmark: &str,
    language: &str,
    dataset: &Path,
    expected_count: usize,
    cache_dir: &Path,
    output_dir: &Path,
) -> PathBuf {
    let path = dir.join("eval.toml");
    let body = format!(
        r#"model_label = "mock-model"
output_dir = {output:?}
cache_dir = {cache:?}

[endpoint]
base_url = "{base_url}"
model = "mock-model"
max_in_flight = 4

[template]
kind = "cot"
shots = 0

[[benchmark]]
id = "{benchmark}"
language = "{language}"
path = {dataset:?}
expected_count = {expected_count}
"#,
        output = output_dir.display().to_string(),
        cache = cache_dir.display().to_string(),
        dataset = dataset.display().to_string(),
    );
    std::fs::write(&path, body).expect("config written");
    path
}

/// Runs the CLI binary with the given arguments.
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let output = std::process::Command::new(env!("CARGO_BIN_EXE_medeval"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).to_string(),
        String::from_utf8_lossy(&output.stderr).to_string(),
    )
}
