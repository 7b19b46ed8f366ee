mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use common::*;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use smartdoc::engine::{MockBackend, Purpose};
use smartdoc::service::{read_feedback, read_reviews, router, AppState, ReviewItem, ReviewStatus};
use smartdoc::workspace::Workspace;
use tower::ServiceExt;

struct Harness {
    dir: tempfile::TempDir,
    app: Router,
    mock: Arc<MockBackend>,
    state: Arc<AppState>,
}

fn harness() -> Harness {
    let dir = copy_fixture(&project_dir());
    let ws = open(dir.path());
    let (engine, mock) = mock_engine(&ws);
    let state = AppState::new(Arc::new(ws), engine).unwrap();
    let app = router(Arc::clone(&state), None);
    Harness { dir, app, mock, state }
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

async fn generate(app: &Router, method: &str) -> String {
    let (status, body) = call(app, "POST", "/api/generate", Some(json!({ "method_id": method }))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{body}");
    body["review_id"].as_str().unwrap().to_string()
}

async fn wait_ready(app: &Router, review: &str) -> ReviewItem {
    for _ in 0..200 {
        let (status, body) = call(app, "GET", &format!("/api/reviews/{review}"), None).await;
        assert_eq!(status, StatusCode::OK);
        let item: ReviewItem = serde_json::from_value(body).unwrap();
        if item.status != ReviewStatus::Generating {
            return item;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("review {review} never finished");
}

fn file_hash(path: &std::path::Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

const PRICING: &str = "src/main/java/com/acme/shop/Pricing.java";

#[tokio::test]
async fn health_and_index_page() {
    let h = harness();
    let (status, body) = call(&h.app, "GET", "/api/health", None).await;
    assert_eq!((status, body), (StatusCode::OK, json!({"status": "ok"})));
    let (status, body) = call(&h.app, "GET", "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.as_str().unwrap().contains("smartdoc"));
}

#[tokio::test]
async fn methods_listing() {
    let h = harness();
    let (_, all) = call(&h.app, "GET", "/api/methods", None).await;
    assert_eq!(all.as_array().unwrap().len(), 12);
    let (_, none) = call(&h.app, "GET", "/api/methods?package=org.other", None).await;
    assert!(none.as_array().unwrap().is_empty());
    let (_, shop) = call(&h.app, "GET", "/api/methods?package=com.acme.shop", None).await;
    let checkout = shop.as_array().unwrap().iter().find(|m| m["method_id"] == "com.acme.shop.Order#checkout/0").unwrap();
    assert_eq!(checkout["has_doc"], true);
}

#[tokio::test]
async fn generate_then_accept_patches_file() {
    let h = harness();
    let review = generate(&h.app, "com.acme.shop.Pricing#applyTax/1").await;
    let item = wait_ready(&h.app, &review).await;
    assert_eq!(item.status, ReviewStatus::Pending);
    assert_eq!(item.proposed.as_deref(), Some("    /**\n     * Performs the applyTax operation.\n     */"));
    assert!(item.diff.as_deref().unwrap().contains("+    /**"));
    assert_eq!(item.context.len(), 1);
    assert_eq!(item.context[0].method.as_str(), "com.acme.shop.Pricing#round/1");

    let (status, body) =
        call(&h.app, "POST", &format!("/api/reviews/{review}/decision"), Some(json!({"decision": "accept"}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["status"], "accepted");
    let text = std::fs::read_to_string(h.dir.path().join(PRICING)).unwrap();
    assert!(text.contains("    /**\n     * Performs the applyTax operation.\n     */\n    public double applyTax"));

    // No way out of a final state.
    let (status, _) =
        call(&h.app, "POST", &format!("/api/reviews/{review}/decision"), Some(json!({"decision": "reject"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    // A second review in the same file still applies after the first edit.
    let other = generate(&h.app, "com.acme.shop.Pricing#discount/1").await;
    wait_ready(&h.app, &other).await;
    let (status, _) =
        call(&h.app, "POST", &format!("/api/reviews/{other}/decision"), Some(json!({"decision": "accept"}))).await;
    assert_eq!(status, StatusCode::OK);
    let text = std::fs::read_to_string(h.dir.path().join(PRICING)).unwrap();
    assert!(text.contains("Performs the applyTax operation.") && text.contains("Performs the discount operation."));
}

#[tokio::test]
async fn reject_leaves_file_untouched() {
    let h = harness();
    let before = file_hash(&h.dir.path().join(PRICING));
    let review = generate(&h.app, "com.acme.shop.Pricing#round/1").await;
    wait_ready(&h.app, &review).await;
    let (status, body) =
        call(&h.app, "POST", &format!("/api/reviews/{review}/decision"), Some(json!({"decision": "reject"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "rejected");
    assert_eq!(file_hash(&h.dir.path().join(PRICING)), before);
}

#[tokio::test]
async fn edit_is_validated() {
    let h = harness();
    let review = generate(&h.app, "com.acme.shop.Pricing#round/1").await;
    wait_ready(&h.app, &review).await;
    let uri = format!("/api/reviews/{review}/decision");
    let (status, body) =
        call(&h.app, "POST", &uri, Some(json!({"decision": "edit", "edited_text": "/** Rounds to cents."}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["detail"].as_str().unwrap().contains("/**"), "{body}");
    let (status, _) = call(&h.app, "POST", &uri, Some(json!({"decision": "edit"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let edited = "/** Rounds a value to two decimals. @param value the amount */";
    let (status, body) = call(&h.app, "POST", &uri, Some(json!({"decision": "edit", "edited_text": edited}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["status"], "edited");
    let text = std::fs::read_to_string(h.dir.path().join(PRICING)).unwrap();
    assert!(text.contains("     * Rounds a value to two decimals.\n     * @param value the amount\n     */\n    static double round"));
}

#[tokio::test]
async fn stale_file_is_a_conflict() {
    let h = harness();
    let review = generate(&h.app, "com.acme.shop.Pricing#round/1").await;
    wait_ready(&h.app, &review).await;
    let path = h.dir.path().join(PRICING);
    let text = std::fs::read_to_string(&path).unwrap().replace("value * 100.0", "value * 1000.0");
    std::fs::write(&path, &text).unwrap();
    let (status, _) =
        call(&h.app, "POST", &format!("/api/reviews/{review}/decision"), Some(json!({"decision": "accept"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[tokio::test]
async fn concurrent_generations_share_summaries() {
    let h = harness();
    let roots = ["com.acme.shop.Order#checkout/0", "com.acme.shop.Order#total/0", "com.acme.shop.Pricing#applyTax/1"];
    let ids = futures::future::join_all(roots.iter().map(|r| generate(&h.app, r))).await;
    for review in &ids {
        assert_eq!(wait_ready(&h.app, review).await.status, ReviewStatus::Pending);
    }
    let unique: BTreeSet<_> = h
        .state
        .engine()
        .reachable_descendants(&roots.iter().map(|r| id(r)).collect::<Vec<_>>())
        .unwrap();
    assert_eq!(h.mock.call_count(Purpose::Summary), unique.len());
    assert_eq!(h.mock.call_count(Purpose::Comment), roots.len());
    let (_, list) = call(&h.app, "GET", "/api/reviews", None).await;
    assert_eq!(list.as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn generate_errors() {
    let h = harness();
    let (status, _) = call(&h.app, "POST", "/api/generate", Some(json!({"method_id": "not an id"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&h.app, "POST", "/api/generate", Some(json!({"method_id": "p.X#y/0"}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&h.app, "GET", "/api/reviews/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn failed_generation_is_reported() {
    let h = harness();
    h.mock.script(Purpose::Comment, &shop("Pricing#round/1"), ["no block"]);
    let review = generate(&h.app, "com.acme.shop.Pricing#round/1").await;
    let item = wait_ready(&h.app, &review).await;
    assert_eq!(item.status, ReviewStatus::Failed);
    assert!(item.error.unwrap().contains("after 3 attempts"));
    let (status, _) =
        call(&h.app, "POST", &format!("/api/reviews/{review}/decision"), Some(json!({"decision": "accept"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn graph_endpoint() {
    let h = harness();
    for uri in ["/api/graph/com.acme.shop.Order%23total%2F0", "/api/graph/com.acme.shop.Order%23total/0"] {
        let (status, body) = call(&h.app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::OK, "{uri}: {body}");
        assert_eq!(
            body["schedule"],
            json!(["com.acme.shop.Pricing#round/1", "com.acme.shop.Pricing#subtotal/1", "com.acme.shop.Order#total/0"])
        );
    }
    let (status, _) = call(&h.app, "GET", "/api/graph/p.X%23y%2F0", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn feedback_validation_and_storage() {
    let h = harness();
    let (status, body) =
        call(&h.app, "POST", "/api/feedback", Some(json!({"rating": 5, "model": "m", "text": null, "review_id": "r1"})))
            .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    for bad in [
        json!({"rating": 0, "model": "m", "review_id": "r1"}),
        json!({"rating": 6, "model": "m", "review_id": "r1"}),
        json!({"rating": 3, "model": "m", "review_id": "r1", "user": "alice"}),
        json!({"model": "m", "review_id": "r1"}),
    ] {
        let (status, _) = call(&h.app, "POST", "/api/feedback", Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }
    let records = read_feedback(&h.state.feedback_path()).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!((records[0].rating, records[0].text.as_deref()), (5, None));
}

#[tokio::test]
async fn concurrent_feedback_appends() {
    let h = harness();
    let sends = (0..100).map(|i| {
        let app = h.app.clone();
        tokio::spawn(async move {
            let body = json!({"rating": 1 + i % 5, "model": "m", "text": format!("note {i} {}", "x".repeat(i * 40)), "review_id": format!("r{i}")});
            call(&app, "POST", "/api/feedback", Some(body)).await.0
        })
    });
    for status in futures::future::join_all(sends).await {
        assert_eq!(status.unwrap(), StatusCode::CREATED);
    }
    let text = std::fs::read_to_string(h.state.feedback_path()).unwrap();
    assert_eq!(text.lines().count(), 100);
    let records = read_feedback(&h.state.feedback_path()).unwrap();
    let ids: BTreeSet<String> = records.iter().map(|r| r.review_id.clone()).collect();
    assert_eq!(ids.len(), 100);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let keys: BTreeSet<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, BTreeSet::from(["timestamp", "model", "rating", "text", "review_id"]));
    }
}

#[tokio::test]
async fn reviews_survive_restart() {
    let h = harness();
    let review = generate(&h.app, "com.acme.shop.Pricing#round/1").await;
    wait_ready(&h.app, &review).await;
    call(&h.app, "POST", &format!("/api/reviews/{review}/decision"), Some(json!({"decision": "reject"}))).await;
    let log = read_reviews(&h.state.reviews_path()).unwrap();
    assert_eq!(log[&review].status, ReviewStatus::Rejected);

    let ws = Workspace::open(h.dir.path(), smartdoc::config::Config::default()).unwrap();
    let (engine, _) = mock_engine(&ws);
    let state = AppState::new(Arc::new(ws), engine).unwrap();
    assert_eq!(state.get_review(&review).await.unwrap().status, ReviewStatus::Rejected);
}
