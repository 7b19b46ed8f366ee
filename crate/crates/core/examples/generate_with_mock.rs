//! Runs the summarize-then-comment pipeline for one method against the
//! offline mock backend and shows every prompt it sent.
//!
//! cargo run --example generate_with_mock -- [ROOT] [METHOD]

use std::path::PathBuf;
use std::sync::Arc;

use smartdoc::config::Config;
use smartdoc::engine::{LlmBackend, MockBackend, Purpose};
use smartdoc::workspace::Workspace;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/project"));
    let query = args.next().unwrap_or_else(|| "Order#checkout/0".into());

    let ws = Workspace::open(root, Config::default())?;
    let target = ws.resolve_method(&query)?;
    let mock = Arc::new(MockBackend::new());
    let backend: Arc<dyn LlmBackend> = mock.clone();
    let engine = ws.engine_with(Arc::clone(&ws.index), backend)?;

    let run = engine.comment_for(&target).await?;
    for call in mock.calls() {
        let kind = match call.purpose {
            Purpose::Summary => "summary",
            Purpose::Comment => "comment",
        };
        println!("==== {kind} request for {}\n{}\n", call.subject, call.user);
    }
    match run.result {
        Ok(c) => println!("generated after {} retries:\n{}", c.retries, c.javadoc),
        Err(e) => println!("generation failed: {e}"),
    }
    Ok(())
}
