use std::path::PathBuf;
use std::time::Duration;

use laylens_client::Client;
use laylens_core::survey::SurveyResponse;
use laylens_core::{JobState, MediaType, Verdict};
use laylens_service::{BackendChoice, MockBackends, RunningService, ServiceConfig};

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)).unwrap()
}

async fn service(dir: &tempfile::TempDir) -> RunningService {
    let cfg = ServiceConfig::new("127.0.0.1:0".parse().unwrap(), dir.path(), BackendChoice::Mock(MockBackends::default()));
    RunningService::start(cfg).await.unwrap()
}

#[tokio::test]
async fn analyze_and_fetch_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(&dir).await;
    let c = Client::new(svc.base_url());
    let id = c.submit(fixture("fake_sample.png"), MediaType::Png).await.unwrap();
    let job = c.wait_for_terminal(&id, Duration::from_millis(10), Duration::from_secs(20)).await.unwrap();
    assert_eq!(job.state(), JobState::Completed);
    assert_eq!(job.verdict(), Some(Verdict::Fake));
    assert_eq!(c.job(&id).await.unwrap(), job);
    assert_eq!(c.jobs(1, 10).await.unwrap(), vec![job.clone()]);
    assert!(c.overlay(&id).await.unwrap().starts_with(b"\x89PNG"));
    assert!(c.reconstruction(&id).await.unwrap().starts_with(b"\x89PNG"));
    assert_eq!(c.cancel(&id).await.unwrap(), job);
    assert_eq!(c.health().await.unwrap()["backends"]["editor"], "reachable");
}

#[tokio::test]
async fn errors_carry_status_and_message() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(&dir).await;
    let c = Client::new(svc.base_url());
    let e = c.submit(fixture("not_an_image.png"), MediaType::Png).await.unwrap_err();
    assert_eq!(e.status(), Some(422));
    let id = c.submit(fixture("detect_real_01.png"), MediaType::Png).await.unwrap();
    c.wait_for_terminal(&id, Duration::from_millis(10), Duration::from_secs(20)).await.unwrap();
    let e = c.overlay(&id).await.unwrap_err();
    assert_eq!(e.status(), Some(404));
    assert!(e.to_string().contains("404"), "{e}");
}

#[tokio::test]
async fn survey_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(&dir).await;
    let c = Client::new(svc.base_url());
    let text = String::from_utf8(fixture("user_study_synthetic.jsonl")).unwrap();
    for (i, line) in text.lines().take(12).enumerate() {
        let r: SurveyResponse = serde_json::from_str(line).unwrap();
        assert_eq!(c.submit_survey(&r).await.unwrap(), i as u64 + 1);
    }
    assert_eq!(c.survey_summary().await.unwrap().responses, 12);
}
