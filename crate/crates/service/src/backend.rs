//! Resilient HTTP clients for the detector, simplifier and editor roles.

use std::fmt;
use std::io::Cursor;
use std::time::Duration;

use laylens_core::protocol::{
    DetectRequest, DetectResponse, EditRequest, EditResponse, SimplifyRequest, SimplifyResponse, DETECT_PATH, EDIT_PATH,
    HEALTH_PATH, SIMPLIFY_PATH,
};
use laylens_core::RegionFinding;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio_util::sync::CancellationToken;

use crate::config::RetryPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendErrorKind {
    Timeout,
    Connect,
    Protocol,
    Rejected,
    Server,
}

impl BackendErrorKind {
    pub fn retryable(self) -> bool {
        matches!(self, Self::Timeout | Self::Connect | Self::Server)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Timeout => "timeout",
            Self::Connect => "connect",
            Self::Protocol => "protocol",
            Self::Rejected => "rejected",
            Self::Server => "server",
        }
    }
}

impl fmt::Display for BackendErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind} error after {attempt_count} attempt(s): {detail}")]
pub struct BackendError {
    pub kind: BackendErrorKind,
    pub attempt_count: u32,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CallError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cancelled")]
    Cancelled,
    #[error("precondition failed: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reachability {
    Reachable,
    Unreachable,
}

/// One failed attempt, before attempt counting.
struct AttemptFailure {
    kind: BackendErrorKind,
    detail: String,
}

impl AttemptFailure {
    fn new(kind: BackendErrorKind, detail: impl Into<String>) -> Self {
        Self { kind, detail: detail.into() }
    }

    fn from_reqwest(e: reqwest::Error) -> Self {
        let kind = if e.is_timeout() {
            BackendErrorKind::Timeout
        } else if e.is_connect() || e.is_request() {
            BackendErrorKind::Connect
        } else {
            BackendErrorKind::Protocol
        };
        Self::new(kind, e.to_string())
    }
}

/// A client for one backend base URL. Cheap to clone.
#[derive(Debug, Clone)]
pub struct BackendClient {
    base: String,
    http: reqwest::Client,
    policy: RetryPolicy,
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Detect,
    Simplify,
    Edit,
}

impl BackendClient {
    pub fn new(base: impl Into<String>, policy: RetryPolicy) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        Self { base, http: reqwest::Client::new(), policy }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    fn timeout(&self, role: Role) -> Duration {
        Duration::from_millis(match role {
            Role::Detect => self.policy.detect_timeout_ms,
            Role::Simplify => self.policy.simplify_timeout_ms,
            Role::Edit => self.policy.edit_timeout_ms,
        })
    }

    /// POSTs `body` with retries. The body is serialized once so every
    /// attempt sends the same bytes.
    async fn call<T: Serialize>(
        &self,
        path: &str,
        role: Role,
        body: &T,
        cancel: &CancellationToken,
    ) -> Result<(Vec<u8>, u32), CallError> {
        let payload = bytes_of(body);
        let url = format!("{}{}", self.base, path);
        let timeout = self.timeout(role);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = tokio::select! {
                _ = cancel.cancelled() => return Err(CallError::Cancelled),
                r = self.attempt(&url, payload.clone(), timeout) => r,
            };
            match result {
                Ok(bytes) => return Ok((bytes, attempt)),
                Err(f) if f.kind.retryable() && attempt < self.policy.max_attempts() => {
                    tracing::debug!(%url, attempt, kind = %f.kind, "backend attempt failed, retrying");
                    tokio::select! {
                        _ = cancel.cancelled() => return Err(CallError::Cancelled),
                        _ = tokio::time::sleep(self.policy.backoff_after(attempt)) => {}
                    }
                }
                Err(f) => {
                    return Err(BackendError { kind: f.kind, attempt_count: attempt, detail: f.detail }.into());
                }
            }
        }
    }

    async fn attempt(&self, url: &str, payload: Vec<u8>, timeout: Duration) -> Result<Vec<u8>, AttemptFailure> {
        let response = self
            .http
            .post(url)
            .timeout(timeout)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(payload)
            .send()
            .await
            .map_err(AttemptFailure::from_reqwest)?;
        let status = response.status();
        if status.is_server_error() {
            return Err(AttemptFailure::new(BackendErrorKind::Server, format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = read_capped(response, 4096).await.map(|b| String::from_utf8_lossy(&b).into_owned()).unwrap_or_default();
            return Err(AttemptFailure::new(BackendErrorKind::Rejected, format!("HTTP {status}: {}", text.trim())));
        }
        read_capped(response, self.policy.max_response_bytes).await
    }

    fn decode<R: DeserializeOwned>(bytes: &[u8], attempts: u32) -> Result<R, CallError> {
        serde_json::from_slice(bytes).map_err(|e| protocol(attempts, format!("malformed response: {e}")))
    }

    /// Calls the detector and validates the response against `image_dims`.
    pub async fn detect(
        &self,
        image: &[u8],
        image_dims: (u32, u32),
        cancel: &CancellationToken,
    ) -> Result<(DetectResponse, Vec<RegionFinding>), CallError> {
        let req = DetectRequest { image: image.to_vec() };
        let (bytes, attempts) = self.call(DETECT_PATH, Role::Detect, &req, cancel).await?;
        let resp: DetectResponse = Self::decode(&bytes, attempts)?;
        let findings = resp.validate(image_dims).map_err(|e| protocol(attempts, e.to_string()))?;
        Ok((resp, findings))
    }

    /// Returns the simplifier's raw text untouched.
    pub async fn simplify(&self, req: &SimplifyRequest, cancel: &CancellationToken) -> Result<String, CallError> {
        req.validate().map_err(|e| CallError::Precondition(e.to_string()))?;
        let (bytes, attempts) = self.call(SIMPLIFY_PATH, Role::Simplify, req, cancel).await?;
        let resp: SimplifyResponse = Self::decode(&bytes, attempts)?;
        Ok(resp.text)
    }

    /// Returns edited image bytes, checked to decode at the input's size.
    pub async fn edit(&self, req: &EditRequest, cancel: &CancellationToken) -> Result<Vec<u8>, CallError> {
        req.validate().map_err(|e| CallError::Precondition(e.to_string()))?;
        let input_dims = dims(&req.image).map_err(|e| CallError::Precondition(format!("input image: {e}")))?;
        let (bytes, attempts) = self.call(EDIT_PATH, Role::Edit, req, cancel).await?;
        let resp: EditResponse = Self::decode(&bytes, attempts)?;
        let out_dims = dims(&resp.image).map_err(|e| protocol(attempts, format!("edited image does not decode: {e}")))?;
        if out_dims != input_dims {
            return Err(protocol(attempts, format!("edited image is {out_dims:?}, input was {input_dims:?}")));
        }
        Ok(resp.image)
    }

    /// Single probe, never retried.
    pub async fn health(&self) -> Reachability {
        let url = format!("{}{}", self.base, HEALTH_PATH);
        let probe = self.http.get(url).timeout(Duration::from_millis(self.policy.health_timeout_ms)).send();
        match probe.await {
            Ok(r) if r.status().is_success() => Reachability::Reachable,
            _ => Reachability::Unreachable,
        }
    }
}

fn bytes_of<T: Serialize>(body: &T) -> Vec<u8> {
    serde_json::to_vec(body).expect("request bodies serialize")
}

fn protocol(attempts: u32, detail: String) -> CallError {
    BackendError { kind: BackendErrorKind::Protocol, attempt_count: attempts, detail }.into()
}

fn dims(bytes: &[u8]) -> Result<(u32, u32), String> {
    image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| e.to_string())?
        .into_dimensions()
        .map_err(|e| e.to_string())
}

async fn read_capped(mut response: reqwest::Response, cap: u64) -> Result<Vec<u8>, AttemptFailure> {
    if response.content_length().is_some_and(|n| n > cap) {
        return Err(AttemptFailure::new(BackendErrorKind::Protocol, format!("response exceeds {cap} bytes")));
    }
    let mut out = Vec::new();
    while let Some(chunk) = response.chunk().await.map_err(AttemptFailure::from_reqwest)? {
        if out.len() as u64 + chunk.len() as u64 > cap {
            return Err(AttemptFailure::new(BackendErrorKind::Protocol, format!("response exceeds {cap} bytes")));
        }
        out.extend_from_slice(&chunk);
    }
    Ok(out)
}
