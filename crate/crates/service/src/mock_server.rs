//! The mock backends served over real HTTP, so the production client path
//! (serialization, retries, timeouts) is exercised end to end.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use laylens_core::mock::{mock_detect, mock_edit, mock_simplify, mock_union_mask, FaultMode, MockConfig};
use laylens_core::protocol::{
    DetectRequest, EditRequest, EditResponse, HealthResponse, SimplifyRequest, SimplifyResponse, DETECT_PATH,
    EDIT_PATH, HEALTH_PATH, SIMPLIFY_PATH,
};
use laylens_core::Sha256Digest;
use serde::de::DeserializeOwned;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use crate::config::MockBackends;

const BODY_LIMIT: usize = 96 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MockRole {
    Detect,
    Simplify,
    Edit,
}

impl MockRole {
    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Default)]
pub struct MockState {
    config: MockBackends,
    calls: [AtomicU32; 3],
    /// sha256 of every request body, in arrival order.
    bodies: Mutex<Vec<(MockRole, Sha256Digest)>>,
}

impl MockState {
    pub fn new(config: MockBackends) -> Self {
        Self { config, ..Default::default() }
    }

    fn config(&self, role: MockRole) -> &MockConfig {
        match role {
            MockRole::Detect => &self.config.detect,
            MockRole::Simplify => &self.config.simplify,
            MockRole::Edit => &self.config.edit,
        }
    }

    pub fn calls(&self, role: MockRole) -> u32 {
        self.calls[role.index()].load(Ordering::SeqCst)
    }

    pub fn total_calls(&self) -> u32 {
        self.calls.iter().map(|c| c.load(Ordering::SeqCst)).sum()
    }

    pub fn body_digests(&self, role: MockRole) -> Vec<Sha256Digest> {
        self.bodies.lock().unwrap().iter().filter(|(r, _)| *r == role).map(|(_, d)| *d).collect()
    }

    /// Counts the call, records the body, applies latency and flakiness.
    /// `Some(response)` short-circuits the handler.
    async fn admit(&self, role: MockRole, body: &[u8]) -> Option<Response> {
        let n = self.calls[role.index()].fetch_add(1, Ordering::SeqCst);
        self.bodies.lock().unwrap().push((role, Sha256Digest::of(body)));
        let cfg = self.config(role);
        if cfg.latency_ms > 0 {
            tokio::time::sleep(Duration::from_millis(cfg.latency_ms)).await;
        }
        match cfg.fault_mode {
            FaultMode::Flaky5xx { first_n } if n < first_n => {
                Some((StatusCode::SERVICE_UNAVAILABLE, "injected failure").into_response())
            }
            _ => None,
        }
    }
}

pub fn router(state: Arc<MockState>) -> Router {
    Router::new()
        .route(DETECT_PATH, post(detect))
        .route(SIMPLIFY_PATH, post(simplify))
        .route(EDIT_PATH, post(edit))
        .route(HEALTH_PATH, get(health))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, Response> {
    serde_json::from_slice(body).map_err(|e| (StatusCode::BAD_REQUEST, e.to_string()).into_response())
}

fn unprocessable(e: impl ToString) -> Response {
    (StatusCode::UNPROCESSABLE_ENTITY, e.to_string()).into_response()
}

async fn detect(State(state): State<Arc<MockState>>, body: Bytes) -> Response {
    if let Some(r) = state.admit(MockRole::Detect, &body).await {
        return r;
    }
    let req: DetectRequest = match parse(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    match mock_detect(&req.image, &state.config.detect) {
        Ok(resp) => Json(resp).into_response(),
        Err(e) => unprocessable(e),
    }
}

async fn simplify(State(state): State<Arc<MockState>>, body: Bytes) -> Response {
    if let Some(r) = state.admit(MockRole::Simplify, &body).await {
        return r;
    }
    let req: SimplifyRequest = match parse(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    Json(SimplifyResponse { text: mock_simplify(&req, &state.config.simplify) }).into_response()
}

async fn edit(State(state): State<Arc<MockState>>, body: Bytes) -> Response {
    if let Some(r) = state.admit(MockRole::Edit, &body).await {
        return r;
    }
    let req: EditRequest = match parse(&body) {
        Ok(r) => r,
        Err(r) => return r,
    };
    // the editor has no mask input on the wire; it re-derives the detector's
    // regions from the same digest
    let mask = match mock_union_mask(&req.image, &state.config.detect) {
        Ok(Some(m)) => m,
        Ok(None) => return unprocessable("nothing to edit"),
        Err(e) => return unprocessable(e),
    };
    match mock_edit(&req, &mask) {
        Ok(image) => Json(EditResponse { image }).into_response(),
        Err(e) => unprocessable(e),
    }
}

async fn health() -> Json<HealthResponse> {
    Json(HealthResponse { status: "ok".into() })
}

/// A running mock backend server. Aborted on drop.
#[derive(Debug)]
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<MockState>,
    task: JoinHandle<()>,
}

impl MockServer {
    pub async fn spawn(addr: SocketAddr, config: MockBackends) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr).await?;
        Self::serve(listener, config)
    }

    pub fn serve(listener: TcpListener, config: MockBackends) -> std::io::Result<Self> {
        let addr = listener.local_addr()?;
        let state = Arc::new(MockState::new(config));
        let app = router(state.clone());
        let task = tokio::spawn(async move {
            if let Err(e) = axum::serve(listener, app).await {
                tracing::error!(error = %e, "mock backend server stopped");
            }
        });
        Ok(Self { addr, state, task })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn state(&self) -> &Arc<MockState> {
        &self.state
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.task.abort();
    }
}
