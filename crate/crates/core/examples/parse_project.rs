//! Scans a Java tree and lists its methods and call sites.
//!
//! cargo run --example parse_project -- [ROOT]

use std::path::PathBuf;

use smartdoc::java::{Project, ScanOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/project"));
    let project = Project::load(root, &ScanOptions::default())?;

    for m in project.methods() {
        let doc = if m.doc_comment.is_some() { "documented" } else { "undocumented" };
        println!("{}  ({}:{}, {doc})", m.id, m.file, m.line);
        println!("    {}", m.signature_line());
    }
    println!();
    for call in project.calls() {
        let recv = call.receiver_hint.as_deref().map(|r| format!("{r}.")).unwrap_or_default();
        println!("{} -> {recv}{}/{}", call.caller, call.callee_name, call.callee_arity);
    }
    for d in &project.diagnostics {
        eprintln!("warning: {d:?}");
    }
    Ok(())
}
