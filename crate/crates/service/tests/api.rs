use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use gridmga_core::{cases, SwitchingOptions};
use gridmga_service::session::{RoundAlternatives, SessionConfig, SessionStatus, SessionSummary};
use gridmga_service::{router, AppState, CreateSession};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn five_bus_session() -> Value {
    let req = CreateSession {
        network: Some(serde_json::to_value(cases::congested_five_bus()).unwrap()),
        config: SessionConfig {
            switching: SwitchingOptions::lines_only(3),
            ..SessionConfig::default()
        },
        ..CreateSession::default()
    };
    serde_json::to_value(req).unwrap()
}

async fn create(app: &Router) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(five_bus_session())).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["status"], "idle");
    body["id"].as_str().unwrap().to_string()
}

async fn settle(app: &Router, id: &str) -> SessionSummary {
    for _ in 0..600 {
        let (status, body) = call(app, "GET", &format!("/sessions/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let s: SessionSummary = serde_json::from_value(body).unwrap();
        if s.status != SessionStatus::Solving {
            return s;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("session {id} still solving");
}

fn app(dir: &std::path::Path) -> Router {
    router(AppState::open(dir, 2).unwrap())
}

#[tokio::test]
async fn full_loop_with_persistence() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app).await;

    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/rounds"), Some(json!({"count": 6}))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    assert_eq!(body["status"], "solving");
    let s = settle(&app, &id).await;
    assert_eq!(s.status, SessionStatus::AwaitingRanking, "{:?}", s.last_error);
    assert!((s.f_star.unwrap() - 4203.125).abs() < 1e-6);
    assert_eq!(s.rounds.len(), 1);

    let (status, body) = call(&app, "GET", &format!("/sessions/{id}/rounds/0/alternatives"), None).await;
    assert_eq!(status, StatusCode::OK);
    let round: RoundAlternatives = serde_json::from_value(body).unwrap();
    assert_eq!(round.alternatives.len(), 6);
    for a in &round.alternatives {
        assert!(a.cost <= round.f_star * 1.05 + 1e-6);
        assert_eq!(a.values.len(), 6);
        for l in &a.loadings {
            if l.open {
                assert_eq!(l.loading, 0.0);
            } else {
                assert!((l.loading - l.flow_mw.abs() / l.limit_mw).abs() < 1e-12);
            }
        }
    }

    let ranking = json!({"ranked_ids": [2, 0, 4], "params": {"variant": "v2", "round_count": 4}});
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/rounds/0/ranking"), Some(ranking)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    let s = settle(&app, &id).await;
    assert_eq!(s.status, SessionStatus::AwaitingRanking, "{:?}", s.last_error);
    assert_eq!(s.rounds[1].label.to_string(), "hitl-v2");
    assert_eq!(s.rounds[1].count, 4);
    assert_eq!(s.rounds[1].ranking.as_ref().unwrap().ranked_ids, vec![2, 0, 4]);

    // rankings must reference the latest round
    let stale = json!({"ranked_ids": [0]});
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/rounds/0/ranking"), Some(stale)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let sim = json!({"fn_id": "u5", "top_k": 2, "params": {"variant": "baseline", "tau": 0.15, "round_count": 3}});
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/rounds/1/simulated-ranking"), Some(sim)).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    let s = settle(&app, &id).await;
    assert_eq!(s.rounds.len(), 3);
    assert_eq!(s.rounds[2].label.to_string(), "hitl-baseline");
    // two ranked alternatives plus their sum
    assert_eq!(s.rounds[2].feedback_weights.len(), 3);

    // a fresh process sees the same history
    let reloaded = self::app(dir.path());
    let (status, body) = call(&reloaded, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    let again: SessionSummary = serde_json::from_value(body).unwrap();
    assert_eq!(again, s);
    let (_, a) = call(&app, "GET", &format!("/sessions/{id}/rounds/2/alternatives"), None).await;
    let (_, b) = call(&reloaded, "GET", &format!("/sessions/{id}/rounds/2/alternatives"), None).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn conflicts_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = create(&app).await;
    let other = create(&app).await;
    assert_ne!(id, other);

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/rounds"), Some(json!({"count": 0}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/rounds/0/ranking"), Some(json!({"ranked_ids": [0]}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/rounds"), Some(json!({"count": 100}))).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let (status, body) = call(&app, "POST", &format!("/sessions/{id}/rounds"), Some(json!({"count": 3}))).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    // another session is unaffected by the running solve
    let (status, body) = call(&app, "GET", &format!("/sessions/{other}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "idle");
    settle(&app, &id).await;

    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/rounds/0/ranking"), Some(json!({"ranked_ids": []}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/rounds/0/ranking"), Some(json!({"ranked_ids": [100]}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, _) = call(&app, "GET", "/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/rounds/7/alternatives"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_networks_list_issues() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut net = serde_json::to_value(cases::triangle()).unwrap();
    net["branches"][0]["to_bus"] = json!(42);
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"network": net}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(!body["issues"].as_array().unwrap().is_empty(), "{body}");

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"case_text": "mpc.bus = [\n1 2"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({"case": "case9999"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = call(&app, "POST", "/sessions", Some(json!({"case": "case57"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["status"], "idle");

    let (status, body) = call(&app, "GET", "/networks", None).await;
    assert_eq!(status, StatusCode::OK);
    let case57 = body.as_array().unwrap().iter().find(|n| n["name"] == "case57").unwrap();
    assert_eq!(case57["buses"], 57);
    assert_eq!(case57["branches"], 80);
}

#[tokio::test]
async fn infeasible_round_reports_error_state() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let mut net = cases::triangle();
    for b in &mut net.branches {
        b.limit_mw = 1.0;
    }
    let body = json!({"network": net, "config": {"switching": {"max_line_actions": 3, "max_busbar_actions": 0, "allow_busbar_splitting": false}}});
    let (status, created) = call(&app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    let id = created["id"].as_str().unwrap();
    call(&app, "POST", &format!("/sessions/{id}/rounds"), Some(json!({"count": 2}))).await;
    let s = settle(&app, id).await;
    assert_eq!(s.status, SessionStatus::Error);
    let err = s.last_error.unwrap();
    assert!(err.infeasibility.unwrap().binding.iter().any(|b| b == "line limits"));
    assert!(s.rounds.is_empty());
}
