use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use alphalaw::records::SourceMethod;
use alphalaw_collector::{
    complete_with_retry, run_protocol, synthetic_problems, CollectionError, CompletionRequest,
    ElicitationContext, HttpProvider, PromptSet, ProtocolConfig, Provider, Stage,
};

/// Authorization header and JSON body of one request.
type Seen = (Option<String>, Value);

#[derive(Clone)]
struct Server {
    hits: Arc<AtomicUsize>,
    /// Requests answered with `fail_status` before succeeding.
    failures: usize,
    fail_status: StatusCode,
    delay: Duration,
    reply: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl Server {
    fn new(reply: &str) -> Self {
        Self {
            hits: Arc::default(),
            failures: 0,
            fail_status: StatusCode::INTERNAL_SERVER_ERROR,
            delay: Duration::ZERO,
            reply: reply.into(),
            seen: Arc::default(),
        }
    }

    async fn start(self) -> String {
        async fn handle(
            State(s): State<Server>,
            headers: HeaderMap,
            Json(body): Json<Value>,
        ) -> (StatusCode, Json<Value>) {
            let n = s.hits.fetch_add(1, Ordering::SeqCst);
            let auth = headers
                .get("authorization")
                .map(|v| v.to_str().unwrap().to_string());
            s.seen.lock().unwrap().push((auth, body));
            tokio::time::sleep(s.delay).await;
            if n < s.failures {
                return (s.fail_status, Json(json!({"error": "try later"})));
            }
            (
                StatusCode::OK,
                Json(json!({"choices": [{"message": {"role": "assistant", "content": s.reply}}]})),
            )
        }
        let app = Router::new()
            .route("/v1/chat", post(handle))
            .with_state(self);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        format!("http://{addr}/v1/chat")
    }
}

fn request() -> CompletionRequest {
    CompletionRequest {
        prompt: "hello".into(),
        temperature: 0.7,
        max_tokens: 32,
        context: ElicitationContext {
            problem_id: "p".into(),
            stage: Stage::Prior,
            k: 2,
            prior: None,
            evidence: None,
        },
    }
}

const FAST: Duration = Duration::from_millis(1);

#[tokio::test]
async fn sends_chat_body_with_bearer_token() {
    let server = Server::new("[0.5, 0.5]");
    let seen = server.seen.clone();
    let url = server.start().await;
    let p = HttpProvider::with_token(
        &url,
        "test-model",
        Some("secret".into()),
        Duration::from_secs(5),
    )
    .unwrap();
    assert_eq!(p.complete(&request()).await.unwrap(), "[0.5, 0.5]");
    let seen = seen.lock().unwrap();
    let (auth, body) = &seen[0];
    assert_eq!(auth.as_deref(), Some("Bearer secret"));
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["role"], "user");
    assert_eq!(body["messages"][0]["content"], "hello");
    assert_eq!(body["temperature"], 0.7);
    assert_eq!(body["max_tokens"], 32);
}

#[tokio::test]
async fn token_is_read_from_named_variable() {
    std::env::set_var("ALPHALAW_HTTP_TEST_TOKEN", "from-env");
    let server = Server::new("[1.0, 0.0]");
    let seen = server.seen.clone();
    let url = server.start().await;
    let p = HttpProvider::new(
        &url,
        "m",
        Some("ALPHALAW_HTTP_TEST_TOKEN"),
        Duration::from_secs(5),
    )
    .unwrap();
    p.complete(&request()).await.unwrap();
    assert_eq!(
        seen.lock().unwrap()[0].0.as_deref(),
        Some("Bearer from-env")
    );
}

#[tokio::test]
async fn server_errors_are_retried() {
    let server = Server {
        failures: 2,
        ..Server::new("[0.5, 0.5]")
    };
    let hits = server.hits.clone();
    let url = server.start().await;
    let p = HttpProvider::with_token(&url, "m", None, Duration::from_secs(5)).unwrap();
    let text = complete_with_retry(&p, &request(), 3, FAST).await.unwrap();
    assert_eq!(text, "[0.5, 0.5]");
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn retries_are_bounded() {
    let server = Server {
        failures: usize::MAX,
        fail_status: StatusCode::SERVICE_UNAVAILABLE,
        ..Server::new("")
    };
    let hits = server.hits.clone();
    let url = server.start().await;
    let p = HttpProvider::with_token(&url, "m", None, Duration::from_secs(5)).unwrap();
    let err = complete_with_retry(&p, &request(), 2, FAST)
        .await
        .unwrap_err();
    assert!(
        matches!(err, CollectionError::Transport { attempts: 3, .. }),
        "{err}"
    );
    assert_eq!(hits.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn client_errors_are_not_retried() {
    let server = Server {
        failures: usize::MAX,
        fail_status: StatusCode::BAD_REQUEST,
        ..Server::new("")
    };
    let hits = server.hits.clone();
    let url = server.start().await;
    let p = HttpProvider::with_token(&url, "m", None, Duration::from_secs(5)).unwrap();
    let err = complete_with_retry(&p, &request(), 3, FAST)
        .await
        .unwrap_err();
    assert!(matches!(err, CollectionError::Rejected { status: 400, .. }));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn slow_responses_time_out() {
    let server = Server {
        delay: Duration::from_secs(3),
        ..Server::new("[0.5, 0.5]")
    };
    let url = server.start().await;
    let p = HttpProvider::with_token(&url, "m", None, Duration::from_millis(200)).unwrap();
    let err = complete_with_retry(&p, &request(), 0, FAST)
        .await
        .unwrap_err();
    assert!(matches!(
        err,
        CollectionError::Transport { attempts: 1, .. }
    ));
}

#[tokio::test]
async fn unreachable_endpoint_is_a_transport_failure() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat", listener.local_addr().unwrap());
    drop(listener);
    let p = HttpProvider::with_token(&url, "m", None, Duration::from_secs(2)).unwrap();
    let err = complete_with_retry(&p, &request(), 1, FAST)
        .await
        .unwrap_err();
    assert!(err.is_transport());
}

#[tokio::test]
async fn protocol_over_http() {
    let url = Server::new("Sure: [0.1, 0.2, 0.3, 0.4]").start().await;
    let p = HttpProvider::with_token(&url, "m", None, Duration::from_secs(5)).unwrap();
    let problem = synthetic_problems(1, 4, 0).remove(0);
    let config = ProtocolConfig {
        model_name: "served".into(),
        ..Default::default()
    };
    let record = run_protocol(&problem, &config, &PromptSet::v1(), &p)
        .await
        .unwrap();
    assert_eq!(record.source_method, SourceMethod::Llm);
    assert_eq!(record.model, "served");
    assert!((record.q1.probs()[3] - 0.4).abs() < 1e-12);
}
