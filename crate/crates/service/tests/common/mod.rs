#![allow(dead_code)]

use std::io::Cursor;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use image::{ImageFormat, Rgba, RgbaImage};
use laylens_core::AnalysisJob;
use laylens_service::{BackendChoice, MockBackends, RetryPolicy, RunningService, ServiceConfig};
use serde_json::Value;
use tempfile::TempDir;

pub fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

pub fn encode(img: &RgbaImage) -> Vec<u8> {
    let mut out = Vec::new();
    img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png).unwrap();
    out
}

pub fn uniform_png(w: u32, h: u32, px: [u8; 4]) -> Vec<u8> {
    encode(&RgbaImage::from_pixel(w, h, Rgba(px)))
}

/// Short backoff, generous timeouts: same control flow, faster tests.
pub fn fast_policy() -> RetryPolicy {
    RetryPolicy { initial_backoff_ms: 20, ..RetryPolicy::default() }
}

pub fn loopback() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

pub struct Harness {
    pub service: RunningService,
    pub dir: TempDir,
}

impl Harness {
    pub async fn start(faults: MockBackends) -> Self {
        Self::start_with(faults, fast_policy(), |_| {}).await
    }

    pub async fn start_with(faults: MockBackends, retry: RetryPolicy, tweak: impl FnOnce(&mut ServiceConfig)) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ServiceConfig::new(loopback(), dir.path(), BackendChoice::Mock(faults));
        cfg.retry = retry;
        tweak(&mut cfg);
        let service = RunningService::start(cfg).await.unwrap();
        Self { service, dir }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.service.base_url(), path)
    }

    pub fn mock(&self) -> &laylens_service::MockState {
        self.service.mock().unwrap().state()
    }
}

pub fn normalized(job: &AnalysisJob) -> Value {
    let mut v = serde_json::to_value(job).unwrap();
    let obj = v.as_object_mut().unwrap();
    for k in ["job_id", "created_at", "updated_at"] {
        obj.remove(k);
    }
    v
}

pub const LONG: Duration = Duration::from_secs(20);
