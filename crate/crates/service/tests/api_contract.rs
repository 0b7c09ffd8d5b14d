mod common;

use std::time::{Duration, Instant};

use common::{fixture, Harness, LONG};
use laylens_core::mock::{FaultMode, MockConfig};
use laylens_service::MockBackends;
use reqwest::multipart::{Form, Part};
use reqwest::StatusCode;
use serde_json::{json, Value};

fn form(bytes: Vec<u8>, mime: &str) -> Form {
    Form::new().part("image", Part::bytes(bytes).file_name("upload").mime_str(mime).unwrap())
}

async fn upload(h: &Harness, bytes: Vec<u8>, mime: &str) -> reqwest::Response {
    reqwest::Client::new().post(h.url("/api/v1/jobs")).multipart(form(bytes, mime)).send().await.unwrap()
}

async fn get_json(url: &str) -> (StatusCode, Value) {
    let r = reqwest::get(url).await.unwrap();
    let status = r.status();
    (status, r.json().await.unwrap())
}

async fn submit_ok(h: &Harness, bytes: Vec<u8>) -> String {
    let r = upload(h, bytes, "image/png").await;
    assert_eq!(r.status(), StatusCode::ACCEPTED);
    let body: Value = r.json().await.unwrap();
    assert_eq!(body.as_object().unwrap().len(), 1);
    body["job_id"].as_str().unwrap().to_string()
}

async fn poll_until(h: &Harness, id: &str, done: impl Fn(&Value) -> bool) -> Value {
    let deadline = Instant::now() + LONG;
    loop {
        let (status, job) = get_json(&h.url(&format!("/api/v1/jobs/{id}"))).await;
        assert_eq!(status, StatusCode::OK);
        if done(&job) {
            return job;
        }
        assert!(Instant::now() < deadline, "timed out: {job}");
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
}

fn terminal(job: &Value) -> bool {
    matches!(job["state"].as_str(), Some("COMPLETED" | "COMPLETED_PARTIAL" | "FAILED" | "CANCELLED"))
}

fn assert_error_body(v: &Value) {
    assert!(v["error"].is_string(), "{v}");
    assert_eq!(v.as_object().unwrap().len(), 1, "{v}");
}

fn assert_job_schema(job: &Value) {
    let o = job.as_object().unwrap();
    for k in ["job_id", "input", "state", "findings", "stage_errors", "created_at", "updated_at", "config_digest"] {
        assert!(o.contains_key(k), "missing {k}: {job}");
    }
    let input = &job["input"];
    assert_eq!(input["sha256"].as_str().unwrap().len(), 64);
    assert!(input["width"].is_u64() && input["height"].is_u64());
    assert_eq!(input["media_type"], "image/png");
    assert_eq!(job["config_digest"].as_str().unwrap().len(), 64);
    for f in job["findings"].as_array().unwrap() {
        assert!(f["label"].is_string());
        assert!(f["mask"]["runs"].is_array());
        assert_eq!(f["bbox"].as_array().unwrap().len(), 4);
    }
}

#[tokio::test]
async fn completed_job_resource_and_artifacts() {
    let h = Harness::start(MockBackends::default()).await;
    let id = submit_ok(&h, fixture("fake_sample.png")).await;
    let job = poll_until(&h, &id, terminal).await;
    assert_job_schema(&job);
    assert_eq!(job["state"], "COMPLETED");
    assert_eq!(job["verdict"], "fake");
    assert!(job["confidence"].as_f64().unwrap() <= 1.0);
    let ex = &job["explanations"];
    assert!(ex["technical"].as_str().unwrap().len() > 10);
    for e in ex["simplified"].as_array().unwrap() {
        assert!(e["region"].is_string() && e["simple_explanation"].is_string() && e["emoji"].is_string());
    }

    for (name, key) in [("overlay.png", "overlay"), ("reconstruction.png", "reconstruction")] {
        let r = reqwest::get(h.url(&format!("/api/v1/jobs/{id}/{name}"))).await.unwrap();
        assert_eq!(r.status(), StatusCode::OK, "{name}");
        assert_eq!(r.headers()["content-type"], "image/png");
        assert!(r.headers()["cache-control"].to_str().unwrap().contains("immutable"));
        let etag = r.headers()["etag"].to_str().unwrap().to_string();
        assert_eq!(etag, format!("\"{}\"", job[key]["sha256"].as_str().unwrap()));
        let img = image::load_from_memory(&r.bytes().await.unwrap()).unwrap();
        assert_eq!((img.width(), img.height()), (256, 192));
    }

    let (status, log) = get_json(&h.url(&format!("/api/v1/jobs/{id}/log"))).await;
    assert_eq!(status, StatusCode::OK);
    let states: Vec<_> = log.as_array().unwrap().iter().map(|e| e["to"].as_str().unwrap().to_string()).collect();
    assert_eq!(states, ["CREATED", "DETECTING", "SIMPLIFYING", "RECONSTRUCTING", "COMPLETED"]);
    for e in log.as_array().unwrap() {
        assert!(e["ts"].is_string() && e["detail"].is_string());
    }

    // cache hit: same job id, 202 again
    assert_eq!(submit_ok(&h, fixture("fake_sample.png")).await, id);
}

#[tokio::test]
async fn artifact_matrix_for_real_and_partial_jobs() {
    let h = Harness::start(MockBackends {
        edit: MockConfig::with_fault(FaultMode::Flaky5xx { first_n: 3 }),
        ..Default::default()
    })
    .await;
    let real = submit_ok(&h, fixture("detect_real_01.png")).await;
    let partial = submit_ok(&h, fixture("fake_sample.png")).await;
    let real_job = poll_until(&h, &real, terminal).await;
    let partial_job = poll_until(&h, &partial, terminal).await;
    assert_eq!(real_job["state"], "COMPLETED");
    assert_eq!(partial_job["state"], "COMPLETED_PARTIAL");
    assert!(partial_job["stage_errors"]["edit"].is_string());
    let expect = [
        (&real, "overlay.png", StatusCode::NOT_FOUND),
        (&real, "reconstruction.png", StatusCode::NOT_FOUND),
        (&partial, "overlay.png", StatusCode::OK),
        (&partial, "reconstruction.png", StatusCode::NOT_FOUND),
    ];
    for (id, name, want) in expect {
        let r = reqwest::get(h.url(&format!("/api/v1/jobs/{id}/{name}"))).await.unwrap();
        assert_eq!(r.status(), want, "{id} {name}");
        if want == StatusCode::NOT_FOUND {
            assert_error_body(&r.json().await.unwrap());
        }
    }
}

#[tokio::test]
async fn submission_errors() {
    let h = Harness::start(MockBackends::default()).await;

    let big = vec![0u8; 17 * 1024 * 1024];
    let r = upload(&h, big, "image/png").await;
    assert_eq!(r.status(), StatusCode::PAYLOAD_TOO_LARGE);

    let r = upload(&h, fixture("fake_sample.png"), "image/gif").await;
    assert_eq!(r.status(), StatusCode::UNSUPPORTED_MEDIA_TYPE);
    assert_error_body(&r.json().await.unwrap());

    let r = upload(&h, fixture("not_an_image.png"), "image/png").await;
    assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_error_body(&r.json().await.unwrap());

    let r = reqwest::Client::new()
        .post(h.url("/api/v1/jobs"))
        .multipart(Form::new().text("other", "x"))
        .send()
        .await
        .unwrap();
    assert_eq!(r.status(), StatusCode::BAD_REQUEST);

    // nothing was created
    let (_, list) = get_json(&h.url("/api/v1/jobs")).await;
    assert!(list["jobs"].as_array().unwrap().is_empty());
    assert_eq!(h.mock().total_calls(), 0);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let h = Harness::start(MockBackends::default()).await;
    let unknown = "00000000-0000-4000-8000-000000000000";
    for path in ["", "/log", "/overlay.png", "/reconstruction.png"] {
        for id in [unknown, "not-a-job"] {
            let r = reqwest::get(h.url(&format!("/api/v1/jobs/{id}{path}"))).await.unwrap();
            assert_eq!(r.status(), StatusCode::NOT_FOUND, "{id}{path}");
            assert_error_body(&r.json().await.unwrap());
        }
    }
    let r = reqwest::Client::new().delete(h.url(&format!("/api/v1/jobs/{unknown}"))).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn progress_is_visible_mid_run_and_delete_cancels() {
    let mut f = MockBackends::default();
    f.simplify.latency_ms = 3000;
    let h = Harness::start(f).await;
    let id = submit_ok(&h, fixture("fake_sample.png")).await;
    let mid = poll_until(&h, &id, |j| j["state"] == "SIMPLIFYING").await;
    assert_job_schema(&mid);
    assert_eq!(mid["findings"].as_array().unwrap().len(), 2);
    assert!(mid.get("explanations").is_none());
    assert!(mid.get("reconstruction").is_none());
    let ov = reqwest::get(h.url(&format!("/api/v1/jobs/{id}/overlay.png"))).await.unwrap();
    assert_eq!(ov.status(), StatusCode::OK);
    let rc = reqwest::get(h.url(&format!("/api/v1/jobs/{id}/reconstruction.png"))).await.unwrap();
    assert_eq!(rc.status(), StatusCode::NOT_FOUND);

    let r = reqwest::Client::new().delete(h.url(&format!("/api/v1/jobs/{id}"))).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let body: Value = r.json().await.unwrap();
    assert_eq!(body["state"], "CANCELLED");
    // deleting again is a no-op on the terminal job
    let r = reqwest::Client::new().delete(h.url(&format!("/api/v1/jobs/{id}"))).send().await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    let again: Value = r.json().await.unwrap();
    assert_eq!(again, body);
}

#[tokio::test]
async fn job_listing_pages_newest_first() {
    let h = Harness::start(MockBackends::default()).await;
    let mut ids = Vec::new();
    for name in ["fake_sample.png", "detect_real_01.png", "detect_fake_00_05.png"] {
        let id = submit_ok(&h, fixture(name)).await;
        poll_until(&h, &id, terminal).await;
        ids.push(id);
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    let (status, page1) = get_json(&h.url("/api/v1/jobs?page=1&page_size=2")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((page1["page"].as_u64(), page1["page_size"].as_u64()), (Some(1), Some(2)));
    let got: Vec<_> = page1["jobs"].as_array().unwrap().iter().map(|j| j["job_id"].as_str().unwrap()).collect();
    assert_eq!(got, [ids[2].as_str(), ids[1].as_str()]);
    let (_, page2) = get_json(&h.url("/api/v1/jobs?page=2&page_size=2")).await;
    let got: Vec<_> = page2["jobs"].as_array().unwrap().iter().map(|j| j["job_id"].as_str().unwrap()).collect();
    assert_eq!(got, [ids[0].as_str()]);
    let (_, all) = get_json(&h.url("/api/v1/jobs")).await;
    assert_eq!(all["jobs"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn survey_endpoints() {
    let h = Harness::start(MockBackends::default()).await;
    let client = reqwest::Client::new();
    let lines = String::from_utf8(fixture("user_study_synthetic.jsonl")).unwrap();
    for (i, line) in lines.lines().take(40).enumerate() {
        let r = client
            .post(h.url("/api/v1/survey"))
            .header("content-type", "application/json")
            .body(line.to_string())
            .send()
            .await
            .unwrap();
        assert_eq!(r.status(), StatusCode::CREATED);
        let body: Value = r.json().await.unwrap();
        assert_eq!(body, json!({ "id": i + 1 }));
    }
    for bad in [
        json!({"participant_id": "P99", "item_id": "img01", "question_id": "ease_complex", "rating": 6}),
        json!({"participant_id": "P99", "item_id": "img01", "question_id": "no_such_question", "rating": 3}),
        json!({"participant_id": "P99"}),
    ] {
        let r = client.post(h.url("/api/v1/survey")).json(&bad).send().await.unwrap();
        assert_eq!(r.status(), StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert_error_body(&r.json().await.unwrap());
    }

    let (status, summary) = get_json(&h.url("/api/v1/survey/summary")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["responses"], 40);
    let dist = summary["distributions"].as_object().unwrap();
    let counted: u64 = dist.values().flat_map(|v| v.as_array().unwrap().iter().map(|c| c.as_u64().unwrap())).sum();
    let rated = lines.lines().take(40).filter(|l| l.contains("\"rating\"")).count() as u64;
    assert_eq!(counted, rated);
    for k in ["preference_simplified", "cognitive_load_reduced", "comparison_helpful", "confidence_improved", "would_use"]
    {
        let p = &summary[k];
        assert!(p["fraction"].is_number() && p["count"].is_u64() && p["total"].is_u64(), "{k}: {p}");
    }

    let r = reqwest::get(h.url("/api/v1/survey/summary.csv")).await.unwrap();
    assert_eq!(r.status(), StatusCode::OK);
    assert!(r.headers()["content-type"].to_str().unwrap().starts_with("text/csv"));
    let csv = r.text().await.unwrap();
    let mut rows = csv.lines();
    assert_eq!(rows.next(), Some("question,rating,count"));
    let total: u64 = rows.map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, rated);
}

#[tokio::test]
async fn health_reports_each_backend_quickly() {
    let h = Harness::start(MockBackends::default()).await;
    let started = Instant::now();
    let (status, body) = get_json(&h.url("/healthz")).await;
    assert!(started.elapsed() < Duration::from_secs(3));
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    for name in ["detector", "simplifier", "editor"] {
        assert_eq!(body["backends"][name], "reachable", "{body}");
    }
}

#[tokio::test]
async fn health_with_dead_backends_stays_within_budget() {
    let closed = tokio::net::TcpListener::bind(common::loopback()).await.unwrap().local_addr().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let endpoints = laylens_service::Endpoints::all(&format!("http://{closed}"));
    let cfg = laylens_service::ServiceConfig::new(common::loopback(), dir.path(), laylens_service::BackendChoice::Remote(endpoints));
    let svc = laylens_service::RunningService::start(cfg).await.unwrap();
    let started = Instant::now();
    let (status, body) = get_json(&format!("{}/healthz", svc.base_url())).await;
    assert!(started.elapsed() < Duration::from_secs(3));
    assert_eq!(status, StatusCode::OK);
    for name in ["detector", "simplifier", "editor"] {
        assert_eq!(body["backends"][name], "unreachable");
    }
}

#[tokio::test]
async fn cors_only_when_configured() {
    let origin = "http://localhost:5173";
    let plain = Harness::start(MockBackends::default()).await;
    let r = reqwest::Client::new().get(plain.url("/healthz")).header("origin", origin).send().await.unwrap();
    assert!(r.headers().get("access-control-allow-origin").is_none());

    let cors = Harness::start_with(MockBackends::default(), common::fast_policy(), |c| {
        c.allow_origin = Some(origin.to_string())
    })
    .await;
    let r = reqwest::Client::new()
        .request(reqwest::Method::OPTIONS, cors.url("/api/v1/jobs"))
        .header("origin", origin)
        .header("access-control-request-method", "POST")
        .send()
        .await
        .unwrap();
    assert!(r.status().is_success());
    assert_eq!(r.headers()["access-control-allow-origin"], origin);
    let r = reqwest::Client::new().get(cors.url("/api/v1/jobs")).header("origin", origin).send().await.unwrap();
    assert_eq!(r.headers()["access-control-allow-origin"], origin);
}
