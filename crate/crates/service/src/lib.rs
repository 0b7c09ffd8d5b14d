//! The orchestration service: backend clients, the job pipeline, the
//! filesystem store, mock backends and the public HTTP API.

pub mod api;
pub mod backend;
pub mod config;
pub mod mock_server;
pub mod pipeline;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use thiserror::Error;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;
use tokio_util::sync::CancellationToken;

pub use backend::{BackendClient, BackendError, BackendErrorKind, CallError, Reachability};
pub use config::{
    BackendChoice, BackendIdentity, Endpoints, MockBackends, PipelineConfig, RetryPolicy, ServiceConfig,
};
pub use mock_server::{MockRole, MockServer, MockState};
pub use pipeline::{Limits, Pipeline, PipelineError, SubmitError, Submitted};
pub use store::{LogEntry, Store, StoreError};

#[derive(Debug, Error)]
pub enum StartError {
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
}

/// A service listening on a socket, plus the in-process mock backends when
/// those were requested.
pub struct RunningService {
    addr: SocketAddr,
    pipeline: Pipeline,
    mock: Option<MockServer>,
    shutdown: CancellationToken,
    task: JoinHandle<std::io::Result<()>>,
}

impl RunningService {
    pub async fn start(cfg: ServiceConfig) -> Result<Self, StartError> {
        let bind = |addr: SocketAddr| async move {
            TcpListener::bind(addr).await.map_err(|source| StartError::Bind { addr, source })
        };
        let (identity, endpoints, mock) = match &cfg.backends {
            BackendChoice::Mock(faults) => {
                let addr = cfg.mock_serve.unwrap_or_else(|| SocketAddr::from(([127, 0, 0, 1], 0)));
                let server = MockServer::serve(bind(addr).await?, faults.clone())
                    .map_err(|source| StartError::Bind { addr, source })?;
                let endpoints = Endpoints::all(&server.base_url());
                (BackendIdentity::Mock(faults.clone()), endpoints, Some(server))
            }
            BackendChoice::Remote(endpoints) => {
                let mock = match cfg.mock_serve {
                    Some(addr) => Some(
                        MockServer::serve(bind(addr).await?, MockBackends::default())
                            .map_err(|source| StartError::Bind { addr, source })?,
                    ),
                    None => None,
                };
                let identity = BackendIdentity::Remote {
                    detector: endpoints.detector.clone(),
                    simplifier: endpoints.simplifier.clone(),
                    editor: endpoints.editor.clone(),
                };
                (identity, endpoints.clone(), mock)
            }
        };
        let mut pipeline_cfg = PipelineConfig::new(identity);
        pipeline_cfg.retry = cfg.retry.clone();
        pipeline_cfg.parser = cfg.parser.clone();
        let store = Arc::new(Store::open(&cfg.data_dir)?);
        let limits = Limits { max_image_bytes: cfg.max_image_bytes, max_inflight: cfg.max_inflight };
        let pipeline = Pipeline::new(store, pipeline_cfg, &endpoints, limits)?;

        let listener = bind(cfg.listen).await?;
        let addr = listener.local_addr().map_err(|source| StartError::Bind { addr: cfg.listen, source })?;
        let app = api::router(api::AppState { pipeline: pipeline.clone() }, cfg.allow_origin.as_deref());
        let shutdown = CancellationToken::new();
        let signal = shutdown.clone();
        let task = tokio::spawn(async move {
            axum::serve(listener, app).with_graceful_shutdown(async move { signal.cancelled().await }).await
        });
        tracing::info!(%addr, config_digest = %pipeline.config_digest(), "service listening");
        Ok(Self { addr, pipeline, mock, shutdown, task })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn pipeline(&self) -> &Pipeline {
        &self.pipeline
    }

    pub fn mock(&self) -> Option<&MockServer> {
        self.mock.as_ref()
    }

    /// Serves until the shutdown token fires or the server errors.
    pub async fn wait(self) -> std::io::Result<()> {
        let Self { task, mock, .. } = self;
        let result = task.await.unwrap_or_else(|e| Err(std::io::Error::other(e)));
        drop(mock);
        result
    }

    pub fn shutdown_token(&self) -> CancellationToken {
        self.shutdown.clone()
    }

    pub async fn shutdown(self) -> std::io::Result<()> {
        self.shutdown.cancel();
        self.wait().await
    }
}
