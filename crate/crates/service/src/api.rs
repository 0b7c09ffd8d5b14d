//! Public HTTP surface.

use std::collections::BTreeMap;
use std::time::Duration;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use laylens_core::survey::{summary_report, SurveyResponse};
use laylens_core::{JobId, MediaType, Sha256Digest};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use crate::backend::Reachability;
use crate::pipeline::{Pipeline, PipelineError, SubmitError};
use crate::store::StoreError;

const HEALTH_BUDGET: Duration = Duration::from_millis(2_500);

#[derive(Clone)]
pub struct AppState {
    pub pipeline: Pipeline,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, e.to_string()),
            PipelineError::Store(s) => s.into(),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        }
    }
}

impl From<SubmitError> for ApiError {
    fn from(e: SubmitError) -> Self {
        let status = match &e {
            SubmitError::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            SubmitError::Undecodable(_) | SubmitError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SubmitError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState, allow_origin: Option<&str>) -> Router {
    // multipart framing needs a little room above the image limit
    let upload_limit = state.pipeline.limits().max_image_bytes + 64 * 1024;
    let mut app = Router::new()
        .route("/api/v1/jobs", post(create_job).layer(DefaultBodyLimit::max(upload_limit)).get(list_jobs))
        .route("/api/v1/jobs/{id}", get(get_job).delete(cancel_job))
        .route("/api/v1/jobs/{id}/log", get(job_log))
        .route("/api/v1/jobs/{id}/overlay.png", get(overlay_png))
        .route("/api/v1/jobs/{id}/reconstruction.png", get(reconstruction_png))
        .route("/api/v1/survey", post(post_survey))
        .route("/api/v1/survey/summary", get(survey_summary))
        .route("/api/v1/survey/summary.csv", get(survey_summary_csv))
        .route("/healthz", get(healthz))
        .with_state(state);
    if let Some(origin) = allow_origin {
        match HeaderValue::from_str(origin) {
            Ok(v) => {
                app = app.layer(
                    CorsLayer::new()
                        .allow_origin(v)
                        .allow_methods([Method::GET, Method::POST, Method::DELETE])
                        .allow_headers(Any),
                );
            }
            Err(_) => tracing::warn!(origin, "ignoring unparseable --allow-origin"),
        }
    }
    app
}

fn parse_id(raw: &str) -> ApiResult<JobId> {
    raw.parse().map_err(|_| ApiError::new(StatusCode::NOT_FOUND, format!("unknown job {raw}")))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub job_id: JobId,
}

async fn create_job(State(app): State<AppState>, mut multipart: Multipart) -> ApiResult<(StatusCode, Json<Created>)> {
    let limit = app.pipeline.limits().max_image_bytes;
    while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::new(e.status(), e.body_text()))? {
        if field.name() != Some("image") {
            continue;
        }
        let declared = field.content_type().unwrap_or("").to_string();
        let media_type: MediaType = declared.parse().map_err(|_| {
            ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, format!("unsupported content type {declared:?}"))
        })?;
        let bytes = field.bytes().await.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
        if bytes.len() > limit {
            return Err(ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, format!("upload exceeds {limit} bytes")));
        }
        let submitted = app.pipeline.submit(&bytes, media_type)?;
        return Ok((StatusCode::ACCEPTED, Json(Created { job_id: submitted.job_id })));
    }
    Err(ApiError::new(StatusCode::BAD_REQUEST, "multipart field \"image\" is required"))
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    page: Option<usize>,
    page_size: Option<usize>,
}

async fn list_jobs(State(app): State<AppState>, Query(q): Query<PageQuery>) -> ApiResult<Response> {
    let page = q.page.unwrap_or(1);
    let page_size = q.page_size.unwrap_or(20).min(200);
    let jobs = app.pipeline.list(page, page_size)?;
    Ok(Json(json!({ "page": page, "page_size": page_size, "jobs": jobs })).into_response())
}

async fn get_job(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    Ok(Json(app.pipeline.get(&id).await?).into_response())
}

async fn cancel_job(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    Ok(Json(app.pipeline.cancel(&id).await?).into_response())
}

async fn job_log(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let id = parse_id(&id)?;
    Ok(Json(app.pipeline.log(&id)?).into_response())
}

async fn artifact(app: &AppState, id: &str, pick: fn(&laylens_core::AnalysisJob) -> Option<Sha256Digest>) -> ApiResult<Response> {
    let id = parse_id(id)?;
    let job = app.pipeline.get(&id).await?;
    let key = pick(&job).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "artifact not available"))?;
    let bytes = app.pipeline.store().get_blob(&key)?;
    let media = image::guess_format(&bytes)
        .ok()
        .filter(|f| *f == image::ImageFormat::Jpeg)
        .map_or("image/png", |_| "image/jpeg");
    Ok((
        [
            (header::CONTENT_TYPE, media.to_string()),
            (header::CACHE_CONTROL, "public, max-age=31536000, immutable".to_string()),
            (header::ETAG, format!("\"{}\"", key.to_hex())),
        ],
        bytes,
    )
        .into_response())
}

async fn overlay_png(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    artifact(&app, &id, |j| j.overlay().map(|r| r.sha256)).await
}

async fn reconstruction_png(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    artifact(&app, &id, |j| j.reconstruction().map(|r| r.sha256)).await
}

async fn post_survey(State(app): State<AppState>, body: axum::body::Bytes) -> ApiResult<(StatusCode, Response)> {
    let resp: SurveyResponse = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid survey response: {e}")))?;
    resp.validate().map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let id = app.pipeline.store().append_survey_response(&resp)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id })).into_response()))
}

async fn survey_summary(State(app): State<AppState>) -> ApiResult<Response> {
    let responses = app.pipeline.store().survey_responses()?;
    Ok(Json(summary_report(&responses)).into_response())
}

async fn survey_summary_csv(State(app): State<AppState>) -> ApiResult<Response> {
    let responses = app.pipeline.store().survey_responses()?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], summary_report(&responses).to_csv()).into_response())
}

async fn healthz(State(app): State<AppState>) -> Json<serde_json::Value> {
    let probes = app.pipeline.backends().map(|(name, client)| {
        let client = client.clone();
        async move { (name, client.health().await) }
    });
    let [a, b, c] = probes;
    let mut backends = BTreeMap::new();
    for (name, _) in app.pipeline.backends() {
        backends.insert(name, Reachability::Unreachable);
    }
    if let Ok(results) = tokio::time::timeout(HEALTH_BUDGET, async { tokio::join!(a, b, c) }).await {
        for (name, r) in [results.0, results.1, results.2] {
            backends.insert(name, r);
        }
    }
    Json(json!({ "status": "ok", "backends": backends }))
}
