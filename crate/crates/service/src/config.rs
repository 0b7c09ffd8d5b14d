//! Runtime configuration for the pipeline and the HTTP service.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use laylens_core::explain::ParserConfig;
use laylens_core::mock::MockConfig;
use laylens_core::overlay::OverlayStyle;
use laylens_core::Sha256Digest;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_IMAGE_BYTES: usize = 16 * 1024 * 1024;
pub const DEFAULT_MAX_INFLIGHT: usize = 4;

/// Retry and timeout policy shared by all backend calls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub backoff_factor: u32,
    pub detect_timeout_ms: u64,
    pub simplify_timeout_ms: u64,
    pub edit_timeout_ms: u64,
    pub health_timeout_ms: u64,
    pub max_response_bytes: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            initial_backoff_ms: 250,
            backoff_factor: 4,
            detect_timeout_ms: 120_000,
            simplify_timeout_ms: 120_000,
            edit_timeout_ms: 300_000,
            health_timeout_ms: 2_000,
            max_response_bytes: 64 * 1024 * 1024,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, for `attempt >= 1`.
    pub fn backoff_after(&self, attempt: u32) -> Duration {
        let factor = (self.backoff_factor as u64).saturating_pow(attempt.saturating_sub(1));
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor))
    }

    pub fn max_attempts(&self) -> u32 {
        1 + self.max_retries
    }
}

/// Fault configuration for each of the three mock roles.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockBackends {
    #[serde(default)]
    pub detect: MockConfig,
    #[serde(default)]
    pub simplify: MockConfig,
    #[serde(default)]
    pub edit: MockConfig,
}

/// What the pipeline talks to. Mock backends are identified by their fault
/// configuration rather than their (ephemeral) loopback address, so the
/// config digest is stable across runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendIdentity {
    Mock(MockBackends),
    Remote { detector: String, simplifier: String, editor: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub backends: BackendIdentity,
    pub retry: RetryPolicy,
    pub parser: ParserConfig,
    pub overlay: OverlayStyle,
}

impl PipelineConfig {
    pub fn new(backends: BackendIdentity) -> Self {
        Self { backends, retry: RetryPolicy::default(), parser: ParserConfig::default(), overlay: OverlayStyle::default() }
    }

    pub fn canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("config serializes")
    }

    pub fn digest(&self) -> Sha256Digest {
        Sha256Digest::of(&self.canonical_json())
    }
}

/// Base URLs the backend clients actually dial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub detector: String,
    pub simplifier: String,
    pub editor: String,
}

impl Endpoints {
    pub fn all(base: &str) -> Self {
        Self { detector: base.into(), simplifier: base.into(), editor: base.into() }
    }
}

#[derive(Debug, Clone)]
pub enum BackendChoice {
    Mock(MockBackends),
    Remote(Endpoints),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
    pub backends: BackendChoice,
    /// Also expose the mock backends over HTTP at this address.
    pub mock_serve: Option<SocketAddr>,
    pub max_image_bytes: usize,
    pub max_inflight: usize,
    pub allow_origin: Option<String>,
    pub parser: ParserConfig,
    pub retry: RetryPolicy,
}

impl ServiceConfig {
    pub fn new(listen: SocketAddr, data_dir: impl Into<PathBuf>, backends: BackendChoice) -> Self {
        Self {
            listen,
            data_dir: data_dir.into(),
            backends,
            mock_serve: None,
            max_image_bytes: DEFAULT_MAX_IMAGE_BYTES,
            max_inflight: DEFAULT_MAX_INFLIGHT,
            allow_origin: None,
            parser: ParserConfig::default(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn mock(listen: SocketAddr, data_dir: impl Into<PathBuf>) -> Self {
        Self::new(listen, data_dir, BackendChoice::Mock(MockBackends::default()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        assert_eq!(p.backoff_after(1), Duration::from_millis(250));
        assert_eq!(p.backoff_after(2), Duration::from_millis(1000));
        assert_eq!(p.max_attempts(), 3);
    }

    #[test]
    fn digest_recomputes_from_serialized_form() {
        let cfg = PipelineConfig::new(BackendIdentity::Mock(MockBackends::default()));
        let back: PipelineConfig = serde_json::from_slice(&cfg.canonical_json()).unwrap();
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn digest_tracks_every_part() {
        let base = PipelineConfig::new(BackendIdentity::Mock(MockBackends::default()));
        let mut retry = base.clone();
        retry.retry.max_retries = 3;
        let mut parser = base.clone();
        parser.parser.jaccard_threshold = 0.6;
        let remote = PipelineConfig::new(BackendIdentity::Remote {
            detector: "http://a".into(),
            simplifier: "http://a".into(),
            editor: "http://a".into(),
        });
        let digests = [base.digest(), retry.digest(), parser.digest(), remote.digest()];
        for i in 0..digests.len() {
            for j in i + 1..digests.len() {
                assert_ne!(digests[i], digests[j]);
            }
        }
    }
}
