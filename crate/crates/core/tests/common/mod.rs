#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use smartdoc::config::Config;
use smartdoc::engine::{Engine, LlmBackend, MockBackend};
use smartdoc::java::MethodId;
use smartdoc::workspace::Workspace;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn project_dir() -> PathBuf {
    fixtures().join("project")
}

pub fn corpus_dir() -> PathBuf {
    fixtures().join("corpus")
}

/// Copies a fixture tree into a fresh temp dir so tests may write to it.
pub fn copy_fixture(src: &Path) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in walkdir::WalkDir::new(src) {
        let entry = entry.unwrap();
        let rel = entry.path().strip_prefix(src).unwrap();
        let dest = dir.path().join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&dest).unwrap();
        } else {
            std::fs::copy(entry.path(), &dest).unwrap();
        }
    }
    dir
}

pub fn open(root: &Path) -> Workspace {
    Workspace::open(root, Config::default()).unwrap()
}

pub fn mock_engine(ws: &Workspace) -> (Engine, Arc<MockBackend>) {
    let mock = Arc::new(MockBackend::new());
    let backend: Arc<dyn LlmBackend> = mock.clone();
    (ws.engine_with(Arc::clone(&ws.index), backend).unwrap(), mock)
}

pub fn id(s: &str) -> MethodId {
    s.parse().unwrap()
}

pub const SHOP: &str = "com.acme.shop";

pub fn shop(s: &str) -> MethodId {
    id(&format!("{SHOP}.{s}"))
}
