//! Drives jobs through detect, simplify and reconstruct.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use laylens_core::explain::{compose_edit_instruction, match_region_label, parse_simplifier_output};
use laylens_core::overlay::compose_overlay;
use laylens_core::protocol::{EditRequest, SimplifyRequest};
use laylens_core::{
    new_job, AnalysisJob, DomainError, ExplanationTiers, ImageRef, JobError, JobId, JobState, MediaType,
    RegionFinding, Sha256Digest, Timestamp, Verdict,
};
use thiserror::Error;
use tokio::sync::Semaphore;
use tokio_util::sync::CancellationToken;

use crate::backend::{BackendClient, CallError};
use crate::config::{Endpoints, PipelineConfig, DEFAULT_MAX_IMAGE_BYTES, DEFAULT_MAX_INFLIGHT};
use crate::store::{LogEntry, Store, StoreError};

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("upload of {size} bytes exceeds the {limit}-byte limit")]
    TooLarge { size: usize, limit: usize },
    #[error("undecodable image: {0}")]
    Undecodable(String),
    #[error(transparent)]
    Invalid(DomainError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown job {0}")]
    NotFound(JobId),
    #[error(transparent)]
    Store(StoreError),
}

impl From<StoreError> for PipelineError {
    fn from(e: StoreError) -> Self {
        Self::Store(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submitted {
    pub job_id: JobId,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_image_bytes: usize,
    pub max_inflight: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_image_bytes: DEFAULT_MAX_IMAGE_BYTES, max_inflight: DEFAULT_MAX_INFLIGHT }
    }
}

struct Slot {
    job: tokio::sync::Mutex<AnalysisJob>,
    cancel: CancellationToken,
}

struct Inner {
    store: Arc<Store>,
    config: PipelineConfig,
    digest: Sha256Digest,
    limits: Limits,
    detector: BackendClient,
    simplifier: BackendClient,
    editor: BackendClient,
    permits: Arc<Semaphore>,
    live: Mutex<HashMap<JobId, Arc<Slot>>>,
    cache: Mutex<HashMap<(Sha256Digest, Sha256Digest), JobId>>,
}

/// Shareable handle to the orchestrator.
#[derive(Clone)]
pub struct Pipeline {
    inner: Arc<Inner>,
}

/// Returned by a stage to stop driving the job; the job is already terminal.
struct Halt;

impl Pipeline {
    /// Rebuilds the cache from the store. Jobs left mid-flight by a previous
    /// process are marked FAILED.
    pub fn new(
        store: Arc<Store>,
        config: PipelineConfig,
        endpoints: &Endpoints,
        limits: Limits,
    ) -> Result<Self, StoreError> {
        let digest = config.digest();
        let client = |base: &str| BackendClient::new(base, config.retry.clone());
        let inner = Inner {
            detector: client(&endpoints.detector),
            simplifier: client(&endpoints.simplifier),
            editor: client(&endpoints.editor),
            permits: Arc::new(Semaphore::new(limits.max_inflight.max(1))),
            store,
            config,
            digest,
            limits,
            live: Mutex::new(HashMap::new()),
            cache: Mutex::new(HashMap::new()),
        };
        for job in inner.store.all_jobs()? {
            if !job.is_terminal() {
                let mut failed = job.clone();
                let from = failed.state();
                let marked = failed
                    .record_stage_error("pipeline", "interrupted by service restart")
                    .and_then(|_| failed.transition(JobState::Failed));
                if marked.is_ok() {
                    inner.store.put_job(&failed)?;
                    inner.log(&failed, Some(from), "interrupted by service restart");
                }
            } else if cacheable(job.state()) {
                inner.cache.lock().unwrap().insert((job.input().sha256, *job.config_digest()), job.job_id().clone());
            }
        }
        Ok(Self { inner: Arc::new(inner) })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.inner.config
    }

    pub fn config_digest(&self) -> Sha256Digest {
        self.inner.digest
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.inner.store
    }

    pub fn limits(&self) -> Limits {
        self.inner.limits
    }

    pub fn backends(&self) -> [(&'static str, &BackendClient); 3] {
        [("detector", &self.inner.detector), ("simplifier", &self.inner.simplifier), ("editor", &self.inner.editor)]
    }

    pub fn submit(&self, bytes: &[u8], media_type: MediaType) -> Result<Submitted, SubmitError> {
        let inner = &self.inner;
        if bytes.len() > inner.limits.max_image_bytes {
            return Err(SubmitError::TooLarge { size: bytes.len(), limit: inner.limits.max_image_bytes });
        }
        let input = ImageRef::from_bytes(bytes, media_type).map_err(|e| match e {
            DomainError::Undecodable(m) => SubmitError::Undecodable(m),
            other => SubmitError::Invalid(other),
        })?;
        // the header alone can look fine on a truncated file
        let format = match media_type {
            MediaType::Png => image::ImageFormat::Png,
            MediaType::Jpeg => image::ImageFormat::Jpeg,
        };
        image::load_from_memory_with_format(bytes, format).map_err(|e| SubmitError::Undecodable(e.to_string()))?;

        let key = (input.sha256, inner.digest);
        if let Some(id) = inner.cache.lock().unwrap().get(&key) {
            return Ok(Submitted { job_id: id.clone(), cache_hit: true });
        }
        inner.store.put_blob(bytes)?;
        let job = new_job(input, bytes, inner.digest).map_err(SubmitError::Invalid)?;
        inner.store.put_job(&job)?;
        inner.log(&job, None, "submitted");
        let job_id = job.job_id().clone();
        let slot = Arc::new(Slot { job: tokio::sync::Mutex::new(job), cancel: CancellationToken::new() });
        inner.live.lock().unwrap().insert(job_id.clone(), slot.clone());
        tokio::spawn(inner_run(self.inner.clone(), slot));
        Ok(Submitted { job_id, cache_hit: false })
    }

    pub async fn get(&self, id: &JobId) -> Result<AnalysisJob, PipelineError> {
        let slot = self.inner.live.lock().unwrap().get(id).cloned();
        if let Some(slot) = slot {
            return Ok(slot.job.lock().await.clone());
        }
        self.inner.store.get_job(id).map_err(|e| not_found(id, e))
    }

    pub fn list(&self, page: usize, page_size: usize) -> Result<Vec<AnalysisJob>, PipelineError> {
        Ok(self.inner.store.list_jobs(page, page_size)?)
    }

    pub fn log(&self, id: &JobId) -> Result<Vec<LogEntry>, PipelineError> {
        self.inner.store.read_log(id).map_err(|e| not_found(id, e))
    }

    /// Cancels a live job; terminal jobs come back unchanged.
    pub async fn cancel(&self, id: &JobId) -> Result<AnalysisJob, PipelineError> {
        let slot = self.inner.live.lock().unwrap().get(id).cloned();
        let Some(slot) = slot else {
            return self.inner.store.get_job(id).map_err(|e| not_found(id, e));
        };
        slot.cancel.cancel();
        let mut guard = slot.job.lock().await;
        if !guard.is_terminal() {
            let _ = self.inner.commit(&mut guard, |j| j.transition(JobState::Cancelled), "cancelled by request");
        }
        Ok(guard.clone())
    }

    /// Polls until the job is terminal or `timeout` elapses.
    pub async fn wait_terminal(&self, id: &JobId, timeout: Duration) -> Result<AnalysisJob, PipelineError> {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            let job = self.get(id).await?;
            if job.is_terminal() || tokio::time::Instant::now() >= deadline {
                return Ok(job);
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
    }
}

fn cacheable(state: JobState) -> bool {
    matches!(state, JobState::Completed | JobState::CompletedPartial)
}

fn not_found(id: &JobId, e: StoreError) -> PipelineError {
    match e {
        StoreError::NotFound(_) => PipelineError::NotFound(id.clone()),
        other => PipelineError::Store(other),
    }
}

async fn inner_run(inner: Arc<Inner>, slot: Arc<Slot>) {
    let permit = tokio::select! {
        _ = slot.cancel.cancelled() => return,
        p = inner.permits.clone().acquire_owned() => p,
    };
    let Ok(_permit) = permit else { return };
    let _ = inner.drive(&slot).await;
}

impl Inner {
    fn log(&self, job: &AnalysisJob, from: Option<JobState>, detail: &str) {
        let entry = LogEntry { ts: Timestamp::now(), from, to: job.state(), detail: detail.to_string() };
        if let Err(e) = self.store.append_log(job.job_id(), &entry) {
            tracing::warn!(job = %job.job_id(), error = %e, "state-change log append failed");
        }
    }

    /// Applies `f` to a copy, persists it, then publishes it. A failure to
    /// persist turns the job FAILED in memory.
    fn commit(
        &self,
        job: &mut AnalysisJob,
        f: impl FnOnce(&mut AnalysisJob) -> Result<(), JobError>,
        detail: &str,
    ) -> Result<(), Halt> {
        let mut next = job.clone();
        let from = job.state();
        if let Err(e) = f(&mut next) {
            self.fail_in_place(job, "pipeline", &e.to_string());
            return Err(Halt);
        }
        if let Err(e) = self.store.put_job(&next) {
            self.fail_in_place(job, "store", &e.to_string());
            return Err(Halt);
        }
        if next.state() != from {
            self.log(&next, Some(from), detail);
        }
        *job = next;
        if job.is_terminal() {
            self.finish(job);
        }
        Ok(())
    }

    fn fail_in_place(&self, job: &mut AnalysisJob, stage: &str, detail: &str) {
        let from = job.state();
        if job.record_stage_error(stage, detail).and_then(|_| job.transition(JobState::Failed)).is_err() {
            return;
        }
        match self.store.put_job(job) {
            Ok(()) => {
                self.log(job, Some(from), detail);
                self.finish(job);
            }
            // keep the slot live so readers still see the in-memory state
            Err(e) => tracing::error!(job = %job.job_id(), error = %e, "could not persist failed job"),
        }
    }

    fn finish(&self, job: &AnalysisJob) {
        self.live.lock().unwrap().remove(job.job_id());
        if cacheable(job.state()) {
            self.cache.lock().unwrap().insert((job.input().sha256, *job.config_digest()), job.job_id().clone());
        }
    }

    async fn apply(
        &self,
        slot: &Slot,
        f: impl FnOnce(&mut AnalysisJob) -> Result<(), JobError>,
        detail: &str,
    ) -> Result<(), Halt> {
        let mut guard = slot.job.lock().await;
        if guard.is_terminal() {
            return Err(Halt);
        }
        self.commit(&mut guard, f, detail)
    }

    async fn advance(
        &self,
        slot: &Slot,
        to: JobState,
        f: impl FnOnce(&mut AnalysisJob) -> Result<(), JobError>,
        detail: &str,
    ) -> Result<(), Halt> {
        self.apply(slot, |j| f(j).and_then(|_| j.transition(to)), detail).await
    }

    async fn fail(&self, slot: &Slot, stage: &str, detail: &str) -> Result<(), Halt> {
        let mut guard = slot.job.lock().await;
        if !guard.is_terminal() {
            self.fail_in_place(&mut guard, stage, detail);
        }
        Err(Halt)
    }

    async fn drive(&self, slot: &Slot) -> Result<(), Halt> {
        let input = slot.job.lock().await.input().clone();
        self.advance(slot, JobState::Detecting, |_| Ok(()), "").await?;
        let image = match self.store.get_blob(&input.sha256) {
            Ok(b) => b,
            Err(e) => return self.fail(slot, "store", &e.to_string()).await,
        };

        let (detection, findings) = match self.detector.detect(&image, (input.width, input.height), &slot.cancel).await
        {
            Ok(v) => v,
            Err(CallError::Cancelled) => return Err(Halt),
            Err(e) => return self.fail(slot, "detect", &e.to_string()).await,
        };
        if detection.verdict == Verdict::Real {
            let conf = detection.confidence;
            return self
                .advance(slot, JobState::Completed, |j| j.set_detection(Verdict::Real, conf, Vec::new()), "verdict real")
                .await;
        }

        let overlay = match self.render_overlay(&image, &input, &findings) {
            Ok(r) => r,
            Err(e) => return self.fail(slot, "overlay", &e).await,
        };
        let conf = detection.confidence;
        let detail = format!("verdict fake, {} region(s)", findings.len());
        let stored = findings.clone();
        self.advance(
            slot,
            JobState::Simplifying,
            move |j| {
                j.set_detection(Verdict::Fake, conf, stored)?;
                j.set_overlay(overlay)
            },
            &detail,
        )
        .await?;

        let technical = detection.technical_explanation;
        let req = SimplifyRequest {
            image: image.clone(),
            technical_explanation: technical.clone(),
            region_labels: findings.iter().map(|f| f.label().to_string()).collect(),
        };
        let outcome = match self.simplifier.simplify(&req, &slot.cancel).await {
            Err(CallError::Cancelled) => return Err(Halt),
            Err(e) => Err(e.to_string()),
            Ok(text) => match parse_simplifier_output(&text) {
                Err(failure) => Err(format!("unparseable simplifier output: {failure}")),
                Ok((parsed, _)) if parsed.entries.is_empty() => Err("no region explanations survived parsing".into()),
                Ok((parsed, report)) => Ok((parsed, report)),
            },
        };
        let (parsed, report) = match outcome {
            Ok(v) => v,
            Err(msg) => {
                let tiers = ExplanationTiers { technical, simplified: Vec::new(), overall_summary: None };
                return self
                    .advance(
                        slot,
                        JobState::CompletedPartial,
                        |j| {
                            j.record_stage_error("simplify", msg.clone())?;
                            j.set_explanations(tiers)
                        },
                        "simplify degraded",
                    )
                    .await;
            }
        };
        let threshold = self.config.parser.jaccard_threshold;
        let simplified: Vec<_> = parsed
            .entries
            .into_iter()
            .map(|mut e| {
                e.matched_region_index = match_region_label(&e.region, &findings, threshold);
                e
            })
            .collect();
        let instruction = compose_edit_instruction(&simplified, &findings, self.config.parser.instruction_cap);
        let tiers = ExplanationTiers { technical, simplified, overall_summary: parsed.overall_summary };
        let detail = format!(
            "{} entr(ies), repairs {:?}, issues {}",
            tiers.simplified.len(),
            report.applied,
            serde_json::to_string(&parsed.issues).unwrap_or_default()
        );
        self.advance(slot, JobState::Reconstructing, |j| j.set_explanations(tiers), &detail).await?;

        let result = match instruction {
            Err(e) => Err(e.to_string()),
            Ok(instruction) => match self.editor.edit(&EditRequest { image, instruction }, &slot.cancel).await {
                Err(CallError::Cancelled) => return Err(Halt),
                Err(e) => Err(e.to_string()),
                Ok(bytes) => self.store_reconstruction(&bytes),
            },
        };
        match result {
            Ok(recon) => self.advance(slot, JobState::Completed, |j| j.set_reconstruction(recon), "").await,
            Err(msg) => {
                self.advance(
                    slot,
                    JobState::CompletedPartial,
                    |j| j.record_stage_error("edit", msg.clone()),
                    "edit degraded",
                )
                .await
            }
        }
    }

    fn render_overlay(&self, image: &[u8], input: &ImageRef, findings: &[RegionFinding]) -> Result<ImageRef, String> {
        let rgba = image::load_from_memory(image).map_err(|e| e.to_string())?.to_rgba8();
        let png = compose_overlay(&rgba, findings, &self.config.overlay).map_err(|e| e.to_string())?;
        let key = self.store.put_blob(&png).map_err(|e| e.to_string())?;
        ImageRef::new(key, MediaType::Png, input.width, input.height).map_err(|e| e.to_string())
    }

    fn store_reconstruction(&self, bytes: &[u8]) -> Result<ImageRef, String> {
        let media_type = match image::guess_format(bytes) {
            Ok(image::ImageFormat::Jpeg) => MediaType::Jpeg,
            Ok(image::ImageFormat::Png) => MediaType::Png,
            other => return Err(format!("unsupported reconstruction format {other:?}")),
        };
        let r = ImageRef::from_bytes(bytes, media_type).map_err(|e| e.to_string())?;
        self.store.put_blob(bytes).map_err(|e| e.to_string())?;
        Ok(r)
    }
}
