//! Comment generation: callee summaries in visiting order, prompt assembly,
//! and retry-bounded structured output.
//!
//! [`Engine`] is cheap to clone and meant to be shared by concurrent request
//! flows. The only shared mutable state is the [`SummaryCache`]; every
//! backend call passes through a semaphore sized by the concurrency limit.

mod backend;
mod cache;
mod prompt;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::graph::{direct_context, dfs_schedule, CallGraph, ContextRef, GraphError, ProjectIndex, Schedule};
use crate::java::{MethodDecl, MethodId};

pub use backend::{
    BackendError, ChatRequest, HttpBackend, LlmBackend, MockBackend, MockCall, MockTable, Purpose,
    API_KEY_ENV, MOCK_DEFAULT_COMMENT, MOCK_DEFAULT_SUMMARY,
};
pub use cache::SingleFlightCache;
pub use prompt::{
    assemble_prompt, assemble_summary_prompt, clean_summary, estimate_tokens, render_context,
    ContextContent, ContextEntry, PromptBundle, PromptTemplate, TemplateError, NO_CALLEES,
};
pub use validate::{check_structure, validate_extract, ValidationError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub method: MethodId,
    pub text: String,
    pub model: String,
    pub created_at: DateTime<Utc>,
}

pub type SummaryCache = SingleFlightCache<MethodId, Summary, EngineError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedComment {
    pub method: MethodId,
    pub raw_response: String,
    pub javadoc: String,
    /// Attempts used before the accepted one.
    pub retries: usize,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("backend failure for {method}: {source}")]
    Backend { method: MethodId, source: BackendError },
    #[error("no valid JavaDoc for {method} after {attempts} attempts")]
    StructuredOutput { method: MethodId, attempts: usize, last_response: String },
    #[error("no usable summary for {method} after {attempts} attempts")]
    EmptySummary { method: MethodId, attempts: usize },
    #[error("max_retries must be at least 1")]
    NoAttempts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub max_retries: usize,
    pub depth_cap: usize,
    pub summary_token_budget: usize,
    pub prompt_token_budget: usize,
    pub concurrency: usize,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            max_retries: 3,
            depth_cap: crate::graph::DEFAULT_DEPTH_CAP,
            summary_token_budget: 120,
            prompt_token_budget: 6000,
            concurrency: 4,
        }
    }
}

/// Outcome of summarizing one schedule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SummaryRun {
    pub summaries: BTreeMap<MethodId, Summary>,
    pub failed: BTreeMap<MethodId, String>,
}

/// Everything produced for one comment request.
#[derive(Debug, Clone)]
pub struct CommentRun {
    pub target: MethodId,
    pub schedule: Schedule,
    pub summaries: SummaryRun,
    pub bundle: PromptBundle,
    pub result: Result<GeneratedComment, EngineError>,
}

#[derive(Clone)]
pub struct Engine {
    index: Arc<ProjectIndex>,
    graph: Arc<CallGraph>,
    backend: Arc<dyn LlmBackend>,
    summary_backend: Arc<dyn LlmBackend>,
    cache: Arc<SummaryCache>,
    template: Arc<PromptTemplate>,
    settings: EngineSettings,
    limiter: Arc<Semaphore>,
}

impl Engine {
    pub fn new(
        index: Arc<ProjectIndex>,
        graph: Arc<CallGraph>,
        backend: Arc<dyn LlmBackend>,
        settings: EngineSettings,
    ) -> Self {
        let limiter = Arc::new(Semaphore::new(settings.concurrency.max(1)));
        Self {
            index,
            graph,
            summary_backend: Arc::clone(&backend),
            backend,
            cache: Arc::new(SummaryCache::new()),
            template: Arc::new(PromptTemplate::builtin()),
            settings,
            limiter,
        }
    }

    /// Uses a separate backend (for example a cheaper model) for summaries.
    pub fn with_summary_backend(mut self, backend: Arc<dyn LlmBackend>) -> Self {
        self.summary_backend = backend;
        self
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = Arc::new(template);
        self
    }

    pub fn with_cache(mut self, cache: Arc<SummaryCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn index(&self) -> &ProjectIndex {
        &self.index
    }

    pub fn graph(&self) -> &CallGraph {
        &self.graph
    }

    pub fn cache(&self) -> &SummaryCache {
        &self.cache
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn model(&self) -> &str {
        self.backend.model()
    }

    pub fn schedule(&self, root: &MethodId) -> Result<Schedule, GraphError> {
        dfs_schedule(&self.graph, root, self.settings.depth_cap)
    }

    fn decl(&self, id: &MethodId) -> Result<&MethodDecl, EngineError> {
        self.index.get(id).ok_or_else(|| GraphError::UnknownMethod(id.clone()).into())
    }

    fn stub(&self, id: &MethodId, depth: usize) -> ContextEntry {
        let sig = self.index.get(id).map_or_else(|| id.to_string(), MethodDecl::signature_line);
        ContextEntry { method: id.clone(), depth, content: ContextContent::Stub(sig) }
    }

    /// Summaries for every scheduled method except the root, in visiting
    /// order. Failed methods become stubs in their callers' prompts.
    pub async fn summarize_schedule(&self, schedule: &Schedule) -> SummaryRun {
        let mut run = SummaryRun::default();
        for id in schedule.descendants() {
            let depth = schedule.depth.get(id).copied().unwrap_or(0);
            let entries: Vec<ContextEntry> = direct_context(&self.graph, schedule, id)
                .iter()
                .map(|r| self.context_entry(r, &run, depth + 1))
                .collect();
            let result = self.cache.get_or_generate(id, || self.generate_summary(id, entries)).await;
            match result {
                Ok(summary) => {
                    run.summaries.insert(id.clone(), summary);
                }
                Err(err) => {
                    log::warn!("summary for {id} failed: {err}");
                    run.failed.insert(id.clone(), err.to_string());
                }
            }
        }
        run
    }

    fn context_entry(&self, r: &ContextRef, run: &SummaryRun, depth: usize) -> ContextEntry {
        match r {
            ContextRef::Summary(c) => match run.summaries.get(c) {
                Some(s) => ContextEntry {
                    method: c.clone(),
                    depth,
                    content: ContextContent::Summary(s.text.clone()),
                },
                None => self.stub(c, depth),
            },
            ContextRef::Stub(c) => self.stub(c, depth),
        }
    }

    async fn generate_summary(&self, id: &MethodId, entries: Vec<ContextEntry>) -> Result<Summary, EngineError> {
        let decl = self.decl(id)?;
        let bundle =
            assemble_summary_prompt(decl, entries, &self.template, self.settings.prompt_token_budget);
        let request = ChatRequest {
            purpose: Purpose::Summary,
            subject: id.clone(),
            system: bundle.system_message,
            user: bundle.user_message,
        };
        let attempts = self.settings.max_retries;
        if attempts == 0 {
            return Err(EngineError::NoAttempts);
        }
        let mut last_err = None;
        for _ in 0..attempts {
            let reply = {
                let _permit = self.limiter.acquire().await.expect("semaphore open");
                self.summary_backend.complete(&request).await
            };
            match reply {
                Ok(text) => {
                    if let Some(text) = clean_summary(&text, self.settings.summary_token_budget) {
                        return Ok(Summary {
                            method: id.clone(),
                            text,
                            model: self.summary_backend.model().to_string(),
                            created_at: Utc::now(),
                        });
                    }
                }
                Err(BackendError::Timeout) => last_err = Some(BackendError::Timeout),
                Err(source) => return Err(EngineError::Backend { method: id.clone(), source }),
            }
        }
        Err(match last_err {
            Some(source) => EngineError::Backend { method: id.clone(), source },
            None => EngineError::EmptySummary { method: id.clone(), attempts },
        })
    }

    /// Context for the root prompt: every scheduled descendant in visiting
    /// order, then stubs for callees cut by the depth cap.
    pub fn root_context(&self, schedule: &Schedule, run: &SummaryRun) -> Vec<ContextEntry> {
        let mut entries: Vec<ContextEntry> = schedule
            .descendants()
            .map(|id| {
                let depth = schedule.depth[id];
                match run.summaries.get(id) {
                    Some(s) => ContextEntry {
                        method: id.clone(),
                        depth,
                        content: ContextContent::Summary(s.text.clone()),
                    },
                    None => self.stub(id, depth),
                }
            })
            .collect();
        let beyond = self.settings.depth_cap + 1;
        entries.extend(schedule.truncated.iter().map(|id| self.stub(id, beyond)));
        // Callees of the root cut by a back edge still deserve a mention.
        for c in self.graph.callees(&schedule.root) {
            if self.graph.is_back_edge(&schedule.root, c) && !schedule.contains(c) && !schedule.truncated.contains(c) {
                entries.push(self.stub(c, 1));
            }
        }
        entries
    }

    /// Full pipeline for one target: schedule, summaries, prompt, comment.
    pub async fn comment_for(&self, target: &MethodId) -> Result<CommentRun, EngineError> {
        let decl = self.decl(target)?;
        let schedule = self.schedule(target)?;
        let summaries = self.summarize_schedule(&schedule).await;
        let entries = self.root_context(&schedule, &summaries);
        let bundle = assemble_prompt(decl, entries, &self.template, self.settings.prompt_token_budget);
        let result = {
            generate_comment_limited(
                decl,
                &bundle,
                self.backend.as_ref(),
                self.settings.max_retries,
                Some(&self.limiter),
            )
            .await
        };
        Ok(CommentRun { target: target.clone(), schedule, summaries, bundle, result })
    }

    /// Runs several targets concurrently over the shared cache. Results are
    /// returned in the order of `targets`.
    pub async fn comment_many(&self, targets: &[MethodId]) -> Vec<Result<CommentRun, EngineError>> {
        let limit = self.settings.concurrency.max(1);
        let mut indexed: Vec<(usize, Result<CommentRun, EngineError>)> = stream::iter(targets.iter().enumerate())
            .map(|(i, t)| async move { (i, self.comment_for(t).await) })
            .buffer_unordered(limit)
            .collect()
            .await;
        indexed.sort_by_key(|(i, _)| *i);
        indexed.into_iter().map(|(_, r)| r).collect()
    }

    /// Internal methods without a doc comment.
    pub fn undocumented(&self) -> Vec<MethodId> {
        self.index.methods.values().filter(|m| m.doc_comment.is_none()).map(|m| m.id.clone()).collect()
    }

    /// Unique methods a set of roots will summarize, within the depth cap.
    pub fn reachable_descendants(&self, roots: &[MethodId]) -> Result<BTreeSet<MethodId>, GraphError> {
        let mut out = BTreeSet::new();
        for root in roots {
            out.extend(self.schedule(root)?.descendants().cloned());
        }
        Ok(out)
    }
}

/// Submits `bundle` until the reply holds a valid JavaDoc block, at most
/// `max_retries` times. Retries resend the identical bundle.
pub async fn generate_comment(
    target: &MethodDecl,
    bundle: &PromptBundle,
    backend: &dyn LlmBackend,
    max_retries: usize,
) -> Result<GeneratedComment, EngineError> {
    generate_comment_limited(target, bundle, backend, max_retries, None).await
}

async fn generate_comment_limited(
    target: &MethodDecl,
    bundle: &PromptBundle,
    backend: &dyn LlmBackend,
    max_retries: usize,
    limiter: Option<&Semaphore>,
) -> Result<GeneratedComment, EngineError> {
    if max_retries == 0 {
        return Err(EngineError::NoAttempts);
    }
    let request = ChatRequest {
        purpose: Purpose::Comment,
        subject: target.id.clone(),
        system: bundle.system_message.clone(),
        user: bundle.user_message.clone(),
    };
    let mut last_response: Option<String> = None;
    let mut timed_out = false;
    for attempt in 0..max_retries {
        let reply = match limiter {
            Some(sem) => {
                let _permit = sem.acquire().await.expect("semaphore open");
                backend.complete(&request).await
            }
            None => backend.complete(&request).await,
        };
        match reply {
            Ok(raw) => {
                timed_out = false;
                match validate_extract(&raw) {
                    Ok(javadoc) => {
                        return Ok(GeneratedComment {
                            method: target.id.clone(),
                            raw_response: raw,
                            javadoc,
                            retries: attempt,
                            model: backend.model().to_string(),
                        })
                    }
                    Err(err) => {
                        log::debug!("attempt {} for {} rejected: {err}", attempt + 1, target.id);
                        last_response = Some(raw);
                    }
                }
            }
            Err(BackendError::Timeout) => timed_out = true,
            Err(source) => return Err(EngineError::Backend { method: target.id.clone(), source }),
        }
    }
    match last_response {
        Some(last_response) if !timed_out => Err(EngineError::StructuredOutput {
            method: target.id.clone(),
            attempts: max_retries,
            last_response,
        }),
        _ => Err(EngineError::Backend { method: target.id.clone(), source: BackendError::Timeout }),
    }
}
