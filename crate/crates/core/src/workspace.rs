//! A loaded project plus its configuration, and the batch generation
//! pipeline shared by the CLI and the review service.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::config::{BackendKind, Config, ConfigError};
use crate::engine::{Engine, HttpBackend, LlmBackend, MockBackend, PromptTemplate, TemplateError};
use crate::graph::{build_index, graph_from_index, CallGraph, ProjectIndex, Resolution};
use crate::java::{CallSite, MethodId, Project, ScanError};
use crate::metrics::{Embedder, HttpEmbedder, MockEmbedder};
use crate::patch::{apply_patches, format_javadoc, plan_patch, unified_diff, write_atomic, Patch, PatchError};

#[derive(Debug, thiserror::Error)]
pub enum WorkspaceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("backend setup failed: {0}")]
    Backend(String),
    #[error("unknown method {0}")]
    UnknownMethod(String),
    #[error("ambiguous method {query}: matches {}", candidates.join(", "))]
    AmbiguousMethod { query: String, candidates: Vec<String> },
    #[error(transparent)]
    Patch(#[from] PatchError),
}

pub struct Workspace {
    pub root: PathBuf,
    pub config: Config,
    pub project: Project,
    pub index: Arc<ProjectIndex>,
    pub graph: Arc<CallGraph>,
    pub resolutions: Vec<(CallSite, Resolution)>,
}

impl Workspace {
    /// Validates `config`, scans and parses `root`, and builds the call graph.
    pub fn open(root: impl Into<PathBuf>, config: Config) -> Result<Self, WorkspaceError> {
        config.validate()?;
        let root = root.into();
        let project = Project::load(root.clone(), &config.scan_options())?;
        let index = build_index(&project);
        let (graph, resolutions) = graph_from_index(&index);
        Ok(Self { root, config, project, index: Arc::new(index), graph: Arc::new(graph), resolutions })
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    fn http_backend(&self, model: &str) -> Result<Arc<dyn LlmBackend>, WorkspaceError> {
        let endpoint = self.config.endpoint.clone().unwrap_or_default();
        let backend = HttpBackend::new(
            endpoint,
            model,
            self.config.temperature,
            self.config.timeout(),
            HttpBackend::api_key_from_env(),
        )
        .map_err(|e| WorkspaceError::Backend(e.to_string()))?;
        Ok(Arc::new(backend))
    }

    /// Mock backend as configured (response table, model label).
    pub fn mock_backend(&self) -> Result<MockBackend, WorkspaceError> {
        let mock = match &self.config.mock_responses {
            Some(p) => MockBackend::from_file(&self.resolve_path(p)).map_err(WorkspaceError::Backend)?,
            None => MockBackend::new(),
        };
        Ok(match &self.config.model {
            Some(m) => mock.with_model(m.clone()),
            None => mock,
        })
    }

    pub fn template(&self) -> Result<PromptTemplate, WorkspaceError> {
        Ok(match &self.config.prompt_template {
            Some(p) => PromptTemplate::load(&self.resolve_path(p))?,
            None => PromptTemplate::builtin(),
        })
    }

    /// Engine over `index` (the project index unless evaluating) using the
    /// configured backends.
    pub fn engine_over(&self, index: Arc<ProjectIndex>) -> Result<Engine, WorkspaceError> {
        let engine = match self.config.backend {
            BackendKind::Mock => {
                let backend: Arc<dyn LlmBackend> = Arc::new(self.mock_backend()?);
                self.engine_with(index, backend)?
            }
            BackendKind::Http => {
                let model = self.config.model.clone().unwrap_or_default();
                let engine = self.engine_with(index, self.http_backend(&model)?)?;
                match &self.config.summary_model {
                    Some(m) if *m != model => engine.with_summary_backend(self.http_backend(m)?),
                    _ => engine,
                }
            }
        };
        Ok(engine)
    }

    pub fn engine(&self) -> Result<Engine, WorkspaceError> {
        self.engine_over(Arc::clone(&self.index))
    }

    /// Engine over `index` with an explicit backend, e.g. a mock whose call
    /// log the caller wants to inspect.
    pub fn engine_with(&self, index: Arc<ProjectIndex>, backend: Arc<dyn LlmBackend>) -> Result<Engine, WorkspaceError> {
        let graph = if Arc::ptr_eq(&index, &self.index) {
            Arc::clone(&self.graph)
        } else {
            Arc::new(graph_from_index(&index).0)
        };
        Ok(Engine::new(index, graph, backend, self.config.engine_settings()).with_template(self.template()?))
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>, WorkspaceError> {
        Ok(match self.config.embedder {
            BackendKind::Mock => Arc::new(MockEmbedder::default()),
            BackendKind::Http => Arc::new(
                HttpEmbedder::new(
                    self.config.embedding_endpoint.clone().unwrap_or_default(),
                    self.config.embedding_model.clone().unwrap_or_default(),
                    self.config.timeout(),
                    HttpBackend::api_key_from_env(),
                )
                .map_err(|e| WorkspaceError::Backend(e.to_string()))?,
            ),
        })
    }

    /// Accepts a full id (`pkg.Class#name/arity`) or any suffix of one that
    /// starts at a class boundary, such as `Class#name/arity`.
    pub fn resolve_method(&self, query: &str) -> Result<MethodId, WorkspaceError> {
        if let Ok(id) = query.parse::<MethodId>() {
            if self.index.methods.contains_key(&id) {
                return Ok(id);
            }
        }
        let suffix = format!(".{query}");
        let matches: Vec<&MethodId> =
            self.index.methods.keys().filter(|id| id.as_str().ends_with(&suffix)).collect();
        match matches.as_slice() {
            [one] => Ok((*one).clone()),
            [] => Err(WorkspaceError::UnknownMethod(query.to_string())),
            many => Err(WorkspaceError::AmbiguousMethod {
                query: query.to_string(),
                candidates: many.iter().map(|m| m.to_string()).collect(),
            }),
        }
    }

    /// Absolute path of a project-relative source file.
    pub fn source_path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetOutcome {
    pub method: MethodId,
    pub retries: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileChange {
    pub file: String,
    pub original: String,
    pub patched: String,
    pub diff: String,
    pub patches: Vec<Patch>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GenReport {
    pub outcomes: Vec<TargetOutcome>,
    pub files: Vec<FileChange>,
}

impl GenReport {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }

    /// Concatenated diffs, one per changed file, in path order.
    pub fn combined_diff(&self) -> String {
        self.files.iter().map(|f| f.diff.as_str()).collect()
    }

    /// Applies every change in place. Each file is re-read and the patches
    /// re-verified against it, so concurrent edits surface as stale errors.
    pub fn write(&self, ws: &Workspace) -> Result<(), WorkspaceError> {
        for f in &self.files {
            let path = ws.source_path(&f.file);
            let current = std::fs::read_to_string(&path)
                .map_err(|source| PatchError::Io { path: path.display().to_string(), source })?;
            let patched = apply_patches(&current, &f.patches)?;
            write_atomic(&path, &patched)?;
        }
        Ok(())
    }

    /// Writes one `.diff` per changed file under `out_dir`, mirroring the
    /// source layout. Returns the written paths.
    pub fn write_diffs(&self, out_dir: &Path) -> Result<Vec<PathBuf>, WorkspaceError> {
        let mut written = Vec::new();
        for f in &self.files {
            let path = out_dir.join(format!("{}.diff", f.file));
            let io = |source| PatchError::Io { path: path.display().to_string(), source };
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
            std::fs::write(&path, &f.diff).map_err(io)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Generates comments for `targets` over one shared engine and turns the
/// successful ones into per-file changes. Nothing is written to disk.
pub async fn generate(ws: &Workspace, engine: &Engine, targets: &[MethodId]) -> GenReport {
    let runs = engine.comment_many(targets).await;
    let mut report = GenReport::default();
    let mut by_file: BTreeMap<String, Vec<Patch>> = BTreeMap::new();
    for (target, run) in targets.iter().zip(runs) {
        let planned = run.and_then(|r| r.result).map_err(|e| e.to_string()).and_then(|generated| {
            let decl = ws.index.get(target).expect("target in index");
            let text = ws.project.file(&decl.file).map(|f| f.text.as_str()).unwrap_or_default();
            let formatted = format_javadoc(&generated.javadoc, &decl.indent);
            plan_patch(decl, &formatted, text).map(|p| (p, generated.retries)).map_err(|e| e.to_string())
        });
        match planned {
            Ok((patch, retries)) => {
                by_file.entry(patch.file.clone()).or_default().push(patch);
                report.outcomes.push(TargetOutcome { method: target.clone(), retries: Some(retries), error: None });
            }
            Err(error) => {
                log::error!("{target}: {error}");
                report.outcomes.push(TargetOutcome { method: target.clone(), retries: None, error: Some(error) });
            }
        }
    }
    for (file, patches) in by_file {
        let original = ws.project.file(&file).map(|f| f.text.clone()).unwrap_or_default();
        match apply_patches(&original, &patches) {
            Ok(patched) => {
                if patched == original {
                    continue;
                }
                let diff = unified_diff(&file, &original, &patched);
                report.files.push(FileChange { file, original, patched, diff, patches });
            }
            Err(e) => {
                for p in &patches {
                    if let Some(o) = report.outcomes.iter_mut().find(|o| o.method == p.method) {
                        o.error = Some(e.to_string());
                    }
                }
            }
        }
    }
    report
}

/// Results of one evaluation run, ready to be written with
/// [`crate::eval::write_reports`].
pub struct EvalOutput {
    pub results: Vec<crate::eval::ItemResult>,
    pub reports: Vec<crate::eval::PackageReport>,
    pub manifest: crate::eval::RunManifest,
}

/// Runs `corpus` through `engine`, which must be built over
/// [`crate::eval::generation_index`], and aggregates per package.
pub async fn evaluate(
    ws: &Workspace,
    engine: &Engine,
    embedder: &dyn Embedder,
    corpus: &[crate::eval::CorpusItem],
) -> EvalOutput {
    let started_at = chrono::Utc::now();
    let strip_tags = !ws.config.raw_tokens;
    let results = crate::eval::run_eval(corpus, engine, embedder, strip_tags).await;
    let reports = crate::eval::aggregate(&results);
    let manifest = crate::eval::RunManifest {
        model: engine.model().to_string(),
        prompt_template_version: engine.template().version.clone(),
        prompt_template_hash: engine.template().hash.clone(),
        config: serde_json::to_value(&ws.config).expect("config serializes"),
        started_at,
        finished_at: chrono::Utc::now(),
        items: results.len(),
        failures: results.iter().filter(|r| !r.is_ok()).count(),
        packages: reports.len(),
    };
    EvalOutput { results, reports, manifest }
}
