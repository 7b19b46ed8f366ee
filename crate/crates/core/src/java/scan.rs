use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use walkdir::WalkDir;

use super::{Diagnostic, SourceFile};

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("cannot read project root {path}: {source}")]
    Root { path: PathBuf, source: std::io::Error },
    #[error("invalid glob `{pattern}`: {source}")]
    Glob { pattern: String, source: globset::Error },
}

/// Include/exclude globs, matched against `/`-separated paths relative to
/// the project root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanOptions {
    pub include: Vec<String>,
    pub exclude: Vec<String>,
}

pub const DEFAULT_EXCLUDES: &[&str] = &[
    "target/**",
    "**/target/**",
    "build/**",
    "**/build/**",
    "**/generated-sources/**",
    "**/generated/**",
    ".smartdoc/**",
];

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            include: vec!["**/*.java".to_string()],
            exclude: DEFAULT_EXCLUDES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Default)]
pub struct ScanResult {
    pub files: Vec<SourceFile>,
    pub diagnostics: Vec<Diagnostic>,
}

fn build_set(patterns: &[String]) -> Result<GlobSet, ScanError> {
    let mut builder = GlobSetBuilder::new();
    for p in patterns {
        let glob = Glob::new(p).map_err(|source| ScanError::Glob { pattern: p.clone(), source })?;
        builder.add(glob);
    }
    builder.build().map_err(|source| ScanError::Glob { pattern: patterns.join(","), source })
}

/// Collects `.java` files under `root`, sorted by relative path.
pub fn scan_project(root: &Path, options: &ScanOptions) -> Result<ScanResult, ScanError> {
    std::fs::read_dir(root).map_err(|source| ScanError::Root { path: root.to_path_buf(), source })?;
    let include = build_set(&options.include)?;
    let exclude = build_set(&options.exclude)?;

    let mut result = ScanResult::default();
    let mut found = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                let path = err.path().map_or_else(String::new, |p| p.display().to_string());
                result.diagnostics.push(Diagnostic { path, line: 0, message: format!("skipped: {err}") });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(root) else { continue };
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        if !rel.ends_with(".java") || !include.is_match(&rel) || exclude.is_match(&rel) {
            continue;
        }
        found.push((rel, entry.into_path()));
    }
    found.sort();

    for (rel, path) in found {
        match std::fs::read(&path) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(text) => result.files.push(SourceFile::new(rel, text)),
                Err(_) => result.diagnostics.push(Diagnostic {
                    path: rel,
                    line: 0,
                    message: "skipped: not valid UTF-8".to_string(),
                }),
            },
            Err(err) => result.diagnostics.push(Diagnostic {
                path: rel,
                line: 0,
                message: format!("skipped: {err}"),
            }),
        }
    }
    Ok(result)
}
