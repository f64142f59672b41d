//! Local HTTP server speaking the chat-completions wire format, backed by a
//! [`MockGateway`]. Lets the real [`super::HttpGateway`] be exercised end to
//! end without a model.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

use super::{FailureKind, Gateway, GatewayError, LogprobRequest, MockGateway, SamplingConfig};

#[derive(Clone)]
struct AppState {
    mock: Arc<MockGateway>,
    api_key: Option<String>,
    stall: Duration,
    requests: Arc<AtomicUsize>,
}

pub struct MockServer {
    addr: SocketAddr,
    requests: Arc<AtomicUsize>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Starts serving on an ephemeral localhost port.
    ///
    /// Requests for prompts scripted with `"fail": "timeout"` are held for
    /// `stall` before answering, which should exceed the client timeout.
    pub fn start(
        mock: Arc<MockGateway>,
        api_key: Option<String>,
        stall: Duration,
    ) -> std::io::Result<Self> {
        let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let requests = Arc::new(AtomicUsize::new(0));
        let state = AppState {
            mock,
            api_key,
            stall,
            requests: Arc::clone(&requests),
        };
        let (tx, rx) = oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()?;
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)
                    .expect("listener conversion failed");
                let app = Router::new()
                    .route("/v1/chat/completions", post(chat_completions))
                    .with_state(state);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .expect("mock server failed");
            });
            runtime.shutdown_timeout(Duration::from_millis(100));
        });
        Ok(Self {
            addr,
            requests,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Number of HTTP requests received so far.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn error_response(status: StatusCode, message: &str) -> Response {
    (status, Json(json!({"error": {"message": message}}))).into_response()
}

async fn chat_completions(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> Response {
    state.requests.fetch_add(1, Ordering::SeqCst);
    if let Some(key) = &state.api_key {
        let expected = format!("Bearer {key}");
        let given = headers.get("authorization").and_then(|v| v.to_str().ok());
        if given != Some(expected.as_str()) {
            return error_response(StatusCode::UNAUTHORIZED, "invalid api key");
        }
    }
    let prompt = body["messages"]
        .as_array()
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .map(str::to_owned);
    let Some(prompt) = prompt else {
        return error_response(StatusCode::BAD_REQUEST, "no user message");
    };
    match state.mock.failure_for(&prompt) {
        Some(FailureKind::Timeout) => {
            tokio::time::sleep(state.stall).await;
            return error_response(StatusCode::GATEWAY_TIMEOUT, "stalled");
        }
        Some(FailureKind::Auth) => return error_response(StatusCode::UNAUTHORIZED, "scripted"),
        Some(FailureKind::ServerError) => {
            return error_response(StatusCode::INTERNAL_SERVER_ERROR, "scripted")
        }
        Some(FailureKind::Malformed) => {
            return (StatusCode::OK, "{\"choices\": [oops").into_response();
        }
        None => {}
    }

    let mock = Arc::clone(&state.mock);
    let wants_logprobs = body["logprobs"].as_bool().unwrap_or(false);
    let result = tokio::task::spawn_blocking(move || {
        if wants_logprobs {
            let req = LogprobRequest {
                prompt,
                top_k: body["top_logprobs"].as_u64().unwrap_or(20) as usize,
            };
            mock.next_token_logprobs(&req).map(|pairs| {
                let top: Vec<Value> = pairs
                    .iter()
                    .map(|p| json!({"token": p.token, "logprob": p.logprob}))
                    .collect();
                let first = pairs.first().map(|p| p.token.clone()).unwrap_or_default();
                json!({
                    "object": "chat.completion",
                    "choices": [{
                        "index": 0,
                        "message": {"role": "assistant", "content": first},
                        "finish_reason": "length",
                        "logprobs": {"content": [{
                            "token": first,
                            "logprob": pairs.first().map(|p| p.logprob).unwrap_or(0.0),
                            "top_logprobs": top
                        }]}
                    }]
                })
            })
        } else {
            let cfg = SamplingConfig {
                temperature: body["temperature"].as_f64().unwrap_or(1.0),
                top_p: body["top_p"].as_f64().unwrap_or(1.0),
                n: body["n"].as_u64().unwrap_or(1) as usize,
                max_tokens: body["max_tokens"].as_u64().unwrap_or(1024) as u32,
                seed: body["seed"].as_u64(),
            };
            mock.generate(&prompt, &cfg).map(|completions| {
                let choices: Vec<Value> = completions
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        json!({
                            "index": i,
                            "message": {"role": "assistant", "content": c.text},
                            "finish_reason": c.finish_reason
                        })
                    })
                    .collect();
                json!({"object": "chat.completion", "choices": choices})
            })
        }
    })
    .await;
    match result {
        Ok(Ok(v)) => (StatusCode::OK, Json(v)).into_response(),
        Ok(Err(GatewayError::Unscripted { prompt_sha256 })) => error_response(
            StatusCode::NOT_FOUND,
            &format!("no fixture for prompt {prompt_sha256}"),
        ),
        Ok(Err(e)) => error_response(StatusCode::BAD_REQUEST, &e.to_string()),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    }
}
