//! Scripted chat-completions endpoint for hermetic runs. Answers are looked
//! up by the `x-prompt-id` header; failures, latency and concurrency are
//! scripted and observable through `/stats`.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::client::PROMPT_ID_HEADER;
use crate::wire::{ChatRequest, ChatResponse};

/// Key in `fail_first` that applies to every prompt.
pub const ANY_PROMPT: &str = "*";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockScript {
    /// Answer per prompt id.
    pub responses: BTreeMap<String, String>,
    /// Answer for ids not in `responses`; without one those get HTTP 404.
    pub default_response: Option<String>,
    /// Status codes returned on a prompt's first requests before it is
    /// answered, e.g. `[429]` or `[503, 503]`.
    pub fail_first: BTreeMap<String, Vec<u16>>,
    /// Fixed delay before every answer.
    pub latency_ms: u64,
    /// Extra per-prompt delay in `[0, spread)`, derived from the prompt id so
    /// completion order differs from request order.
    pub latency_spread_ms: u64,
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<MockScript, serde_json::Error> {
        serde_json::from_str(text)
    }

    fn failure_for(&self, prompt_id: &str, seen: usize) -> Option<u16> {
        self.fail_first
            .get(prompt_id)
            .or_else(|| self.fail_first.get(ANY_PROMPT))
            .and_then(|codes| codes.get(seen).copied())
    }

    fn delay_for(&self, prompt_id: &str) -> Duration {
        let spread = if self.latency_spread_ms == 0 {
            0
        } else {
            // FNV-1a of the id
            let h = prompt_id
                .bytes()
                .fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
            h % self.latency_spread_ms
        };
        Duration::from_millis(self.latency_ms + spread)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockStats {
    pub requests: usize,
    pub in_flight: usize,
    pub high_water: usize,
    pub per_prompt: BTreeMap<String, usize>,
}

struct Shared {
    script: MockScript,
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    high_water: AtomicUsize,
    per_prompt: Mutex<HashMap<String, usize>>,
}

impl Shared {
    fn stats(&self) -> MockStats {
        MockStats {
            requests: self.requests.load(Ordering::SeqCst),
            in_flight: self.in_flight.load(Ordering::SeqCst),
            high_water: self.high_water.load(Ordering::SeqCst),
            per_prompt: self.per_prompt.lock().unwrap().iter().map(|(k, v)| (k.clone(), *v)).collect(),
        }
    }
}

struct InFlight<'a>(&'a AtomicUsize);

impl Drop for InFlight<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

fn error_body(status: StatusCode, message: &str) -> Response {
    let body = serde_json::json!({"error": {"message": message, "type": "mock_error", "code": status.as_u16()}});
    (status, Json(body)).into_response()
}

async fn completions(State(shared): State<Arc<Shared>>, headers: HeaderMap, body: axum::body::Bytes) -> Response {
    shared.requests.fetch_add(1, Ordering::SeqCst);
    let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    shared.high_water.fetch_max(now, Ordering::SeqCst);
    let _guard = InFlight(&shared.in_flight);

    let prompt_id = headers
        .get(PROMPT_ID_HEADER)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    let seen = {
        let mut per = shared.per_prompt.lock().unwrap();
        let n = per.entry(prompt_id.clone()).or_insert(0);
        *n += 1;
        *n - 1
    };
    let req: ChatRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_body(StatusCode::BAD_REQUEST, &format!("bad request body: {e}")),
    };
    if req.text().is_none() || !req.image_url().is_some_and(|u| u.starts_with("data:image/")) {
        return error_body(StatusCode::BAD_REQUEST, "expected a text part and an image data uri");
    }

    tokio::time::sleep(shared.script.delay_for(&prompt_id)).await;

    if let Some(code) = shared.script.failure_for(&prompt_id, seen) {
        let status = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        return error_body(status, "scripted failure");
    }
    let answer = shared
        .script
        .responses
        .get(&prompt_id)
        .or(shared.script.default_response.as_ref());
    match answer {
        Some(text) => Json(ChatResponse::single(&req.model, &format!("mock-{prompt_id}-{seen}"), text)).into_response(),
        None => error_body(StatusCode::NOT_FOUND, &format!("no scripted response for {prompt_id:?}")),
    }
}

async fn stats(State(shared): State<Arc<Shared>>) -> Json<MockStats> {
    Json(shared.stats())
}

fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route("/v1/chat/completions", post(completions))
        .route("/chat/completions", post(completions))
        .route("/stats", get(stats))
        .route("/health", get(|| async { "ok" }))
        .with_state(shared)
}

fn shared(script: MockScript) -> Arc<Shared> {
    Arc::new(Shared {
        script,
        requests: AtomicUsize::new(0),
        in_flight: AtomicUsize::new(0),
        high_water: AtomicUsize::new(0),
        per_prompt: Mutex::new(HashMap::new()),
    })
}

/// Serves until the process ends.
pub async fn serve(listener: TcpListener, script: MockScript) -> std::io::Result<()> {
    axum::serve(listener, router(shared(script))).await
}

/// A mock server on a background task; shut down on drop.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: Option<oneshot::Sender<()>>,
}

impl MockServer {
    /// Binds `127.0.0.1` on an ephemeral port.
    pub async fn start(script: MockScript) -> std::io::Result<MockServer> {
        let listener = TcpListener::bind(("127.0.0.1", 0)).await?;
        let addr = listener.local_addr()?;
        let shared = shared(script);
        let (stop, stopped) = oneshot::channel::<()>();
        let app = router(shared.clone());
        tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = stopped.await;
                })
                .await;
        });
        Ok(MockServer {
            addr,
            shared,
            stop: Some(stop),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn stats(&self) -> MockStats {
        self.shared.stats()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
    }
}
