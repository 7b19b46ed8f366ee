//! Drives the review API in-process: request a comment, poll until it is
//! ready, accept it, and leave a rating. The project is copied to a temp
//! dir first because accepting patches the source.
//!
//! cargo run --example review_service

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use smartdoc::config::Config;
use smartdoc::service::{router, AppState};
use smartdoc::workspace::Workspace;
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn copy_tree(src: &Path, dest: &Path) -> std::io::Result<()> {
    for entry in walkdir::WalkDir::new(src) {
        let entry = entry?;
        let to = dest.join(entry.path().strip_prefix(src).unwrap());
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&to)?;
        } else {
            std::fs::copy(entry.path(), &to)?;
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/project");
    let dir = tempfile::tempdir()?;
    copy_tree(&fixture, dir.path())?;

    let ws = Arc::new(Workspace::open(dir.path(), Config::default())?);
    let engine = ws.engine()?;
    let app = router(AppState::new(Arc::clone(&ws), engine)?, None);

    let (_, methods) = call(&app, "GET", "/api/methods", None).await;
    println!("{} methods", methods.as_array().map_or(0, Vec::len));

    let (status, body) =
        call(&app, "POST", "/api/generate", Some(json!({"method_id": "com.acme.shop.Order#total/0"}))).await;
    println!("generate: {status} {body}");
    let id = body["review_id"].as_str().unwrap().to_string();

    let review = loop {
        let (_, r) = call(&app, "GET", &format!("/api/reviews/{id}"), None).await;
        if r["status"] != "generating" {
            break r;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    };
    println!("review {} is {}:\n{}", id, review["status"], review["diff"].as_str().unwrap_or(""));

    let (status, r) = call(&app, "POST", &format!("/api/reviews/{id}/decision"), Some(json!({"decision": "accept"}))).await;
    println!("accept: {status} -> {}", r["status"]);

    let (status, _) =
        call(&app, "POST", "/api/feedback", Some(json!({"rating": 4, "model": review["model"], "text": "clear enough", "review_id": id}))).await;
    println!("feedback: {status}");
    println!("{}", std::fs::read_to_string(dir.path().join(".smartdoc/feedback.jsonl"))?);
    Ok(())
}
