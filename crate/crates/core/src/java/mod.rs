//! Java source frontend: project scanning, method extraction, and call sites.

mod lexer;
mod parser;
mod scan;

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{package_of, parse_file};
pub use scan::{scan_project, ScanError, ScanOptions, ScanResult};

/// A `.java` file loaded from disk. `path` is relative to the project root
/// and always uses `/` separators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub path: String,
    pub text: String,
    pub package_name: String,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let package_name = package_of(&text);
        Self { path: path.into(), text, package_name }
    }
}

/// Canonical method identity, `package.Class#name/arity`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MethodId(String);

impl MethodId {
    pub fn new(class_fqn: &str, name: &str, arity: usize) -> Self {
        Self(format!("{class_fqn}#{name}/{arity}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn class_fqn(&self) -> &str {
        self.0.split_once('#').map_or("", |(c, _)| c)
    }

    pub fn name(&self) -> &str {
        self.0
            .split_once('#')
            .and_then(|(_, rest)| rest.rsplit_once('/'))
            .map_or("", |(n, _)| n)
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed method id `{0}` (expected `package.Class#name/arity`)")]
pub struct MethodIdParseError(String);

impl FromStr for MethodId {
    type Err = MethodIdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MethodIdParseError(s.to_string());
        let (class, rest) = s.split_once('#').ok_or_else(bad)?;
        let (name, arity) = rest.rsplit_once('/').ok_or_else(bad)?;
        if class.is_empty() || name.is_empty() || arity.parse::<usize>().is_err() {
            return Err(bad());
        }
        Ok(Self(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub id: MethodId,
    pub file: String,
    pub package: String,
    pub class_fqn: String,
    pub name: String,
    pub arity: usize,
    pub param_types: Vec<String>,
    /// 1-based line of the method name.
    pub line: usize,
    /// Declaration header, annotations included, up to the body's `{`.
    pub signature_span: Range<usize>,
    pub signature_text: String,
    pub body_span: Range<usize>,
    pub body_text: String,
    pub doc_comment: Option<String>,
    pub doc_span: Option<Range<usize>>,
    pub indent: String,
}

impl MethodDecl {
    /// Header text with whitespace runs collapsed, for prompts and stubs.
    pub fn signature_line(&self) -> String {
        self.signature_text.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    pub fn source_text(&self) -> String {
        format!("{} {}", self.signature_text.trim_end(), self.body_text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    pub caller: MethodId,
    pub callee_name: String,
    pub callee_arity: usize,
    pub receiver_hint: Option<String>,
    pub span: Range<usize>,
}

/// Non-fatal problem found while scanning or parsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.path, self.line, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedFile {
    pub methods: Vec<MethodDecl>,
    pub calls: Vec<CallSite>,
    pub diagnostics: Vec<Diagnostic>,
}

/// A scanned and parsed project snapshot.
#[derive(Debug, Clone, Default)]
pub struct Project {
    pub root: PathBuf,
    pub files: Vec<SourceFile>,
    pub parsed: Vec<ParsedFile>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Project {
    pub fn load(root: impl Into<PathBuf>, options: &ScanOptions) -> Result<Self, ScanError> {
        let root = root.into();
        let scan = scan_project(&root, options)?;
        Ok(Self::from_files(root, scan.files, scan.diagnostics))
    }

    /// Parses files concurrently; output order follows `files`.
    pub fn from_files(root: PathBuf, files: Vec<SourceFile>, mut diagnostics: Vec<Diagnostic>) -> Self {
        let parsed: Vec<ParsedFile> = std::thread::scope(|scope| {
            let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
            let chunk = files.len().div_ceil(workers).max(1);
            let handles: Vec<_> = files
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(parse_file).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("parser thread panicked")).collect()
        });
        for p in &parsed {
            diagnostics.extend(p.diagnostics.iter().cloned());
        }
        Self { root, files, parsed, diagnostics }
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodDecl> {
        self.parsed.iter().flat_map(|p| p.methods.iter())
    }

    pub fn calls(&self) -> impl Iterator<Item = &CallSite> {
        self.parsed.iter().flat_map(|p| p.calls.iter())
    }

    pub fn file(&self, path: &str) -> Option<&SourceFile> {
        self.files.iter().find(|f| f.path == path)
    }
}

/// 1-based line number of a byte offset.
pub fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1
}
