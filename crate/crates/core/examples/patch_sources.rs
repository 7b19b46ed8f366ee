//! Generates comments for every undocumented method and prints the diff.
//! With `--write` the project is first copied to a temp dir and patched
//! there, then rescanned.
//!
//! cargo run --example patch_sources -- [ROOT] [--write]

use std::path::PathBuf;

use smartdoc::config::Config;
use smartdoc::workspace::{generate, Workspace};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let write = args.iter().any(|a| a == "--write");
    let root = args
        .iter()
        .find(|a| !a.starts_with("--"))
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/project"));

    let scratch = tempfile::tempdir()?;
    let root = if write {
        for entry in walkdir::WalkDir::new(&root) {
            let entry = entry?;
            let dest = scratch.path().join(entry.path().strip_prefix(&root)?);
            if entry.file_type().is_dir() {
                std::fs::create_dir_all(&dest)?;
            } else {
                std::fs::copy(entry.path(), &dest)?;
            }
        }
        scratch.path().to_path_buf()
    } else {
        root
    };

    let ws = Workspace::open(&root, Config::default())?;
    let engine = ws.engine()?;
    let targets = engine.undocumented();
    let report = generate(&ws, &engine, &targets).await;
    print!("{}", report.combined_diff());

    if write {
        report.write(&ws)?;
        let after = Workspace::open(&root, Config::default())?;
        let missing = after.project.methods().filter(|m| m.doc_comment.is_none()).count();
        println!("patched {} files under {}; {missing} methods still undocumented", report.files.len(), root.display());
    }
    Ok(())
}
