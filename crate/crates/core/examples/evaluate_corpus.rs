//! Holds out existing JavaDoc, regenerates it with the mock backend and
//! writes per-item and per-package score reports.
//!
//! cargo run --example evaluate_corpus -- [ROOT] [OUT_DIR]

use std::path::PathBuf;
use std::sync::Arc;

use smartdoc::config::Config;
use smartdoc::eval::{generation_index, select_corpus, write_reports};
use smartdoc::workspace::{evaluate, Workspace};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let root = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus"));
    let scratch = tempfile::tempdir()?;
    let out_dir = args.next().map(PathBuf::from).unwrap_or_else(|| scratch.path().to_path_buf());

    let ws = Workspace::open(root, Config::default())?;
    let corpus = select_corpus(&ws.index, &ws.config.corpus_options())?;
    println!("{} held-out methods", corpus.len());

    // The generator never sees the held-out comments.
    let engine = ws.engine_over(Arc::new(generation_index(&ws.index, &corpus)))?;
    let embedder = ws.embedder()?;
    let out = evaluate(&ws, &engine, embedder.as_ref(), &corpus).await;

    for r in &out.reports {
        println!(
            "{}: n={} failed={} BLEU {:.3} ROUGE-1 F1 {:.3} BERTScore P/R/F1 {:.3}/{:.3}/{:.3}",
            r.package, r.n, r.failed, r.bleu_mean, r.rouge1.f1, r.bertscore.precision, r.bertscore.recall, r.bertscore.f1
        );
    }
    for path in write_reports(&out_dir, &out.results, &out.reports, &out.manifest, true)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
