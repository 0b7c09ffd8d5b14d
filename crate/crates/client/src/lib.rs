//! Thin async client for the service's public HTTP API.

use std::time::Duration;

use laylens_core::survey::{SurveyResponse, SurveySummary};
use laylens_core::{AnalysisJob, JobId, MediaType};
use reqwest::multipart::{Form, Part};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error("job {0} did not finish within {1:?}")]
    Timeout(JobId, Duration),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            Self::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

#[derive(Debug, Deserialize)]
struct Created {
    job_id: JobId,
}

#[derive(Debug, Deserialize)]
struct RecordId {
    id: u64,
}

#[derive(Debug, Deserialize)]
struct JobPage {
    jobs: Vec<AnalysisJob>,
}

#[derive(Debug, Deserialize)]
struct ErrorBody {
    error: String,
}

impl Client {
    pub fn new(base: impl Into<String>) -> Self {
        Self { base: base.into().trim_end_matches('/').to_string(), http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    async fn check(response: reqwest::Response) -> Result<reqwest::Response> {
        let status = response.status();
        if status.is_success() {
            return Ok(response);
        }
        let text = response.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
        Err(ClientError::Status { status: status.as_u16(), message })
    }

    async fn json<T: DeserializeOwned>(request: reqwest::RequestBuilder) -> Result<T> {
        Ok(Self::check(request.send().await?).await?.json().await?)
    }

    pub async fn submit(&self, bytes: Vec<u8>, media_type: MediaType) -> Result<JobId> {
        let part = Part::bytes(bytes).file_name("upload").mime_str(media_type.as_str())?;
        let form = Form::new().part("image", part);
        let created: Created = Self::json(self.http.post(self.url("/api/v1/jobs")).multipart(form)).await?;
        Ok(created.job_id)
    }

    pub async fn job(&self, id: &JobId) -> Result<AnalysisJob> {
        Self::json(self.http.get(self.url(&format!("/api/v1/jobs/{id}")))).await
    }

    pub async fn jobs(&self, page: usize, page_size: usize) -> Result<Vec<AnalysisJob>> {
        let req = self.http.get(self.url(&format!("/api/v1/jobs?page={page}&page_size={page_size}")));
        Ok(Self::json::<JobPage>(req).await?.jobs)
    }

    pub async fn cancel(&self, id: &JobId) -> Result<AnalysisJob> {
        Self::json(self.http.delete(self.url(&format!("/api/v1/jobs/{id}")))).await
    }

    async fn bytes(&self, path: &str) -> Result<Vec<u8>> {
        let response = Self::check(self.http.get(self.url(path)).send().await?).await?;
        Ok(response.bytes().await?.to_vec())
    }

    pub async fn overlay(&self, id: &JobId) -> Result<Vec<u8>> {
        self.bytes(&format!("/api/v1/jobs/{id}/overlay.png")).await
    }

    pub async fn reconstruction(&self, id: &JobId) -> Result<Vec<u8>> {
        self.bytes(&format!("/api/v1/jobs/{id}/reconstruction.png")).await
    }

    /// Polls every `interval` until the job is terminal.
    pub async fn wait_for_terminal(&self, id: &JobId, interval: Duration, timeout: Duration) -> Result<AnalysisJob> {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            let job = self.job(id).await?;
            if job.is_terminal() {
                return Ok(job);
            }
            if tokio::time::Instant::now() >= deadline {
                return Err(ClientError::Timeout(id.clone(), timeout));
            }
            tokio::time::sleep(interval).await;
        }
    }

    pub async fn submit_survey(&self, response: &SurveyResponse) -> Result<u64> {
        let created: RecordId = Self::json(self.http.post(self.url("/api/v1/survey")).json(response)).await?;
        Ok(created.id)
    }

    pub async fn survey_summary(&self) -> Result<SurveySummary> {
        Self::json(self.http.get(self.url("/api/v1/survey/summary"))).await
    }

    pub async fn health(&self) -> Result<serde_json::Value> {
        Self::json(self.http.get(self.url("/healthz"))).await
    }
}
