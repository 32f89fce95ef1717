use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use std::sync::Arc;
use std::time::Duration;
use tower::ServiceExt;

use ddq::domain::{DialogueAct, Intent, Slot};
use ddq::experiment::RunSpec;
use ddq::trainer::{Trainer, TrainerConfig, Variant};
use ddq_hitl::{router, HitlConfig, HitlService};

fn trainer_config() -> TrainerConfig {
    let mut trainer = TrainerConfig::default();
    trainer.rbs_dialogues = 20;
    trainer.pretrain.dialogues = 20;
    trainer.pretrain.epochs = 2;
    trainer
}

fn app(runs: Vec<RunSpec>) -> (Arc<HitlService>, Router) {
    let service = Arc::new(HitlService::open(HitlConfig::new(trainer_config(), runs)).unwrap());
    (Arc::clone(&service), router(service))
}

fn one_run() -> (Arc<HitlService>, Router) {
    app(vec![RunSpec::new(Variant::Ddq, 2)])
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn turn(turn_id: u64, act: &DialogueAct) -> Option<Value> {
    Some(json!({ "turn_id": turn_id, "act": act }))
}

async fn create(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/v1/sessions", None).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn full_dialogue_over_http() {
    let (service, app) = one_run();
    let id = create(&app).await;
    let opening = DialogueAct::request(Slot::Ticket).with_inform(Slot::MovieName, "batman");
    for t in 0..6u64 {
        let act = if t == 0 { opening.clone() } else { DialogueAct::new(Intent::NotSure) };
        let (status, body) = call(&app, "POST", &format!("/v1/sessions/{id}/turns"), turn(t, &act)).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        assert_eq!(body["kind"], "agent_turn");
        assert_eq!(body["turn_count"], t + 1);
        assert!(body["text"].as_str().is_some_and(|s| !s.is_empty()));
    }
    let (status, body) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["transcript"].as_array().unwrap().len(), 12);
    assert_eq!(body["status"], "active");

    let (status, body) = call(&app, "POST", &format!("/v1/sessions/{id}/feedback"), Some(json!({"success": true}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["episode_return"], 74.0);
    assert_eq!(body["turns"], 6);
    service.flush();
    let (status, body) = call(&app, "GET", "/v1/runs", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body[0]["sessions_committed"], 1);
    assert_eq!(body[0]["epoch"], 1);
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let (_, app) = one_run();
    let id = create(&app).await;
    let act = DialogueAct::inform(Slot::MovieName, "batman");

    let (status, body) = call(&app, "GET", "/v1/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "unknown_session");

    let (status, body) = call(&app, "POST", &format!("/v1/sessions/{id}/turns"), turn(0, &DialogueAct::new(Intent::Request))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert!(body["message"].as_str().is_some());

    let (status, _) = call(&app, "POST", &format!("/v1/sessions/{id}/turns"), turn(0, &act)).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(&app, "POST", &format!("/v1/sessions/{id}/turns"), turn(0, &act)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(&app, "POST", &format!("/v1/sessions/{id}/turns"), turn(7, &act)).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, body) = call(&app, "POST", &format!("/v1/sessions/{id}/abandon"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["reason"], "abandoned");
    let (status, _) = call(&app, "POST", &format!("/v1/sessions/{id}/feedback"), Some(json!({"success": true}))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, body) = call(&app, "POST", &format!("/v1/sessions/{id}/turns"), Some(json!({"turn_id": 1}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["error"], "invalid_body");
}

#[tokio::test]
async fn no_runs_is_service_unavailable() {
    let (_, app) = app(vec![]);
    let (status, body) = call(&app, "POST", "/v1/sessions", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["error"], "no_runs");
}

/// Reads SSE frames until `n` events have arrived.
async fn read_events(body: &mut Body, n: usize) -> Vec<(String, Value)> {
    let mut text = String::new();
    let mut events = Vec::new();
    while events.len() < n {
        let frame = tokio::time::timeout(Duration::from_secs(10), body.frame())
            .await
            .expect("event within 10s")
            .expect("stream open")
            .unwrap();
        let Ok(data) = frame.into_data() else { continue };
        text.push_str(std::str::from_utf8(&data).unwrap());
        while let Some(end) = text.find("\n\n") {
            let block: String = text.drain(..end + 2).collect();
            let field = |name: &str| block.lines().find_map(|l| l.strip_prefix(name).map(str::to_string));
            if let (Some(kind), Some(data)) = (field("event: "), field("data: ")) {
                events.push((kind, serde_json::from_str(&data).unwrap()));
            }
        }
    }
    events
}

#[tokio::test]
async fn stream_carries_agent_turns_and_the_terminal_notice() {
    let (_, app) = one_run();
    let id = create(&app).await;
    let other = create(&app).await;
    let req = Request::builder().uri(format!("/v1/sessions/{id}/stream")).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();

    let act = DialogueAct::inform(Slot::MovieName, "batman");
    call(&app, "POST", &format!("/v1/sessions/{other}/turns"), turn(0, &act)).await;
    let (_, reply) = call(&app, "POST", &format!("/v1/sessions/{id}/turns"), turn(0, &act)).await;
    call(&app, "POST", &format!("/v1/sessions/{id}/turns"), turn(1, &DialogueAct::new(Intent::Thanks))).await;
    call(&app, "POST", &format!("/v1/sessions/{id}/feedback"), Some(json!({"success": false}))).await;

    let events = read_events(&mut body, 3).await;
    let kinds: Vec<&str> = events.iter().map(|(k, _)| k.as_str()).collect();
    assert_eq!(kinds, ["agent_turn", "awaiting_feedback", "terminal"]);
    assert!(events.iter().all(|(_, v)| v["session_id"] == id.as_str()));
    assert_eq!(events[0].1["action"], reply["action"]);
    assert_eq!(events[2].1["feedback"]["episode_return"], -41.0);

    let (status, _) = call(&app, "GET", "/v1/sessions/nope/stream", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn checkpoint_sets_the_initial_policy() {
    let mut config = trainer_config();
    config.seed = 99;
    let trainer = Trainer::new(config).unwrap();
    let expected = trainer.qnet().mlp().fingerprint();
    let mut hitl = HitlConfig::new(trainer_config(), vec![RunSpec::new(Variant::Dqn, 0), RunSpec::new(Variant::Ddq, 3)]);
    hitl.checkpoint = Some(trainer.checkpoint());
    let service = Arc::new(HitlService::open(hitl).unwrap());
    let (status, body) = call(&router(service), "GET", "/v1/runs", None).await;
    assert_eq!(status, StatusCode::OK);
    for run in body.as_array().unwrap() {
        assert_eq!(run["policy_fingerprint"], expected.as_str());
    }
}
