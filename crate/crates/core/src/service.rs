//! Local HTTP review service and anonymous feedback store.
//!
//! Reviews and feedback live as append-only JSONL under `.smartdoc/`. A
//! review line is a full snapshot; the last line for an id wins on reload.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::{Mutex, RwLock};

use crate::config::CONFIG_DIR;
use crate::engine::{validate_extract, ContextEntry, Engine};
use crate::graph::rooted_graph;
use crate::java::{parse_file, MethodId, SourceFile};
use crate::patch::{apply_patch, format_javadoc, plan_patch, unified_diff, write_atomic};
use crate::workspace::Workspace;

pub const REVIEWS_FILE: &str = "reviews.jsonl";
pub const FEEDBACK_FILE: &str = "feedback.jsonl";

const PLACEHOLDER_PAGE: &str = "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>smartdoc</title></head>\n<body><h1>smartdoc review service</h1>\n<p>No UI assets are configured. The JSON API is available under <code>/api/</code>.</p>\n</body></html>\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewStatus {
    /// Generation still running.
    Generating,
    /// Generation failed; nothing to decide.
    Failed,
    Pending,
    Accepted,
    Rejected,
    Edited,
}

impl ReviewStatus {
    pub fn is_final(self) -> bool {
        matches!(self, Self::Failed | Self::Accepted | Self::Rejected | Self::Edited)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub id: String,
    pub method: MethodId,
    pub file: String,
    pub original_doc: Option<String>,
    /// Formatted comment, once generated; the edited text after an edit.
    pub proposed: Option<String>,
    /// Unified diff of the file with `proposed` applied.
    pub diff: Option<String>,
    /// Callee context in schedule order.
    pub context: Vec<ContextEntry>,
    pub status: ReviewStatus,
    pub retries: Option<usize>,
    pub model: String,
    pub error: Option<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    /// Hash of the declaration and body at generation time.
    pub source_hash: String,
}

/// One rating. There are no user fields by design.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRecord {
    pub timestamp: DateTime<Utc>,
    pub model: String,
    pub rating: u8,
    pub text: Option<String>,
    pub review_id: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub rating: i64,
    pub model: String,
    #[serde(default)]
    pub text: Option<String>,
    pub review_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
    Edit,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DecisionRequest {
    pub decision: Decision,
    #[serde(default)]
    pub edited_text: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct GenerateRequest {
    pub method_id: String,
}

#[derive(Debug, Deserialize)]
pub struct MethodsQuery {
    pub package: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct MethodInfo {
    pub method_id: MethodId,
    pub package: String,
    pub file: String,
    pub line: usize,
    pub has_doc: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{message}")]
    Unprocessable { message: String, detail: Option<String> },
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, detail) = match &self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, None),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, None),
            ServiceError::Unprocessable { detail, .. } => (StatusCode::UNPROCESSABLE_ENTITY, detail.clone()),
            ServiceError::Conflict(_) => (StatusCode::CONFLICT, None),
            ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, None),
        };
        let body = serde_json::json!({ "error": self.to_string(), "detail": detail });
        (status, Json(body)).into_response()
    }
}

fn sha256_hex(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// Appends `line` plus a newline with a single write.
fn append_line(path: &Path, line: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = Vec::with_capacity(line.len() + 1);
    buf.extend_from_slice(line.as_bytes());
    buf.push(b'\n');
    f.write_all(&buf)?;
    f.sync_data()
}

#[derive(Debug, thiserror::Error)]
pub enum FeedbackLogError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Schema { path: PathBuf, line: usize, message: String },
}

/// Reads the feedback log, checking every line against the schema.
pub fn read_feedback(path: &Path) -> Result<Vec<FeedbackRecord>, FeedbackLogError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => return Err(FeedbackLogError::Io { path: path.to_path_buf(), source }),
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let schema = |message: String| FeedbackLogError::Schema { path: path.to_path_buf(), line: i + 1, message };
        let record: FeedbackRecord = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        if !(1..=5).contains(&record.rating) {
            return Err(schema(format!("rating {} out of range 1..5", record.rating)));
        }
        out.push(record);
    }
    Ok(out)
}

/// Last snapshot per review id. Unreadable lines are skipped with a warning.
pub fn read_reviews(path: &Path) -> std::io::Result<BTreeMap<String, ReviewItem>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(e),
    };
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        match serde_json::from_str::<ReviewItem>(line) {
            Ok(item) => {
                out.insert(item.id.clone(), item);
            }
            Err(e) => log::warn!("{}:{}: skipping review line: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

pub struct AppState {
    ws: Arc<Workspace>,
    engine: Engine,
    reviews: RwLock<BTreeMap<String, Arc<Mutex<ReviewItem>>>>,
    review_log: Mutex<()>,
    feedback_log: Mutex<()>,
    /// Serializes source file writes across reviews.
    source_writes: Mutex<()>,
    state_dir: PathBuf,
}

impl AppState {
    /// Loads persisted reviews from `<root>/.smartdoc/`. Reviews that were
    /// still generating when the previous process stopped become failed.
    pub fn new(ws: Arc<Workspace>, engine: Engine) -> std::io::Result<Arc<Self>> {
        let state_dir = ws.root.join(CONFIG_DIR);
        let mut reviews = BTreeMap::new();
        for (id, mut item) in read_reviews(&state_dir.join(REVIEWS_FILE))? {
            if item.status == ReviewStatus::Generating {
                item.status = ReviewStatus::Failed;
                item.error = Some("interrupted before generation finished".into());
            }
            reviews.insert(id, Arc::new(Mutex::new(item)));
        }
        Ok(Arc::new(Self {
            ws,
            engine,
            reviews: RwLock::new(reviews),
            review_log: Mutex::new(()),
            feedback_log: Mutex::new(()),
            source_writes: Mutex::new(()),
            state_dir,
        }))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn reviews_path(&self) -> PathBuf {
        self.state_dir.join(REVIEWS_FILE)
    }

    pub fn feedback_path(&self) -> PathBuf {
        self.state_dir.join(FEEDBACK_FILE)
    }

    async fn persist(&self, item: &ReviewItem) -> Result<(), ServiceError> {
        let line = serde_json::to_string(item).expect("serializable");
        let _guard = self.review_log.lock().await;
        append_line(&self.reviews_path(), &line).map_err(|e| ServiceError::Internal(e.to_string()))
    }

    async fn review(&self, id: &str) -> Result<Arc<Mutex<ReviewItem>>, ServiceError> {
        self.reviews.read().await.get(id).cloned().ok_or_else(|| ServiceError::NotFound(format!("unknown review {id}")))
    }

    /// Registers a review and starts generation in the background.
    pub async fn start_generation(self: &Arc<Self>, method: MethodId) -> Result<String, ServiceError> {
        let decl = self.ws.index.get(&method).ok_or_else(|| ServiceError::NotFound(format!("unknown method {method}")))?;
        let now = Utc::now();
        let item = ReviewItem {
            id: uuid::Uuid::new_v4().to_string(),
            method: method.clone(),
            file: decl.file.clone(),
            original_doc: decl.doc_comment.clone(),
            proposed: None,
            diff: None,
            context: Vec::new(),
            status: ReviewStatus::Generating,
            retries: None,
            model: self.engine.model().to_string(),
            error: None,
            created_at: now,
            updated_at: now,
            source_hash: sha256_hex(&[&decl.signature_text, &decl.body_text]),
        };
        let id = item.id.clone();
        self.persist(&item).await?;
        let slot = Arc::new(Mutex::new(item));
        self.reviews.write().await.insert(id.clone(), Arc::clone(&slot));

        let state = Arc::clone(self);
        tokio::spawn(async move {
            let mut draft = slot.lock().await.clone();
            state.fill_review(&mut draft).await;
            let mut item = slot.lock().await;
            *item = draft;
            if let Err(e) = state.persist(&item).await {
                log::error!("cannot persist review {}: {e}", item.id);
            }
        });
        Ok(id)
    }

    async fn fill_review(&self, item: &mut ReviewItem) {
        item.updated_at = Utc::now();
        let run = match self.engine.comment_for(&item.method).await {
            Ok(run) => run,
            Err(e) => {
                item.status = ReviewStatus::Failed;
                item.error = Some(e.to_string());
                return;
            }
        };
        item.context = run.bundle.context_entries.clone();
        let generated = match run.result {
            Ok(g) => g,
            Err(e) => {
                item.status = ReviewStatus::Failed;
                item.error = Some(e.to_string());
                return;
            }
        };
        let decl = self.ws.index.get(&item.method).expect("method in index");
        let formatted = format_javadoc(&generated.javadoc, &decl.indent);
        let text = self.ws.project.file(&decl.file).map(|f| f.text.as_str()).unwrap_or_default();
        item.retries = Some(generated.retries);
        match plan_patch(decl, &formatted, text).and_then(|p| apply_patch(text, &p)) {
            Ok(patched) => {
                item.diff = Some(unified_diff(&decl.file, text, &patched));
                item.proposed = Some(formatted);
                item.status = ReviewStatus::Pending;
            }
            Err(e) => {
                item.status = ReviewStatus::Failed;
                item.error = Some(e.to_string());
            }
        }
        item.updated_at = Utc::now();
    }

    /// Applies a decision to a pending review. Accept and edit patch the
    /// source file on disk; reject touches nothing.
    pub async fn decide(&self, id: &str, req: DecisionRequest) -> Result<ReviewItem, ServiceError> {
        let slot = self.review(id).await?;
        let mut item = slot.lock().await;
        if item.status != ReviewStatus::Pending {
            return Err(ServiceError::Conflict(format!(
                "review {id} is {:?}, only pending reviews can be decided",
                item.status
            )));
        }
        let (comment, status) = match req.decision {
            Decision::Reject => {
                item.status = ReviewStatus::Rejected;
                item.updated_at = Utc::now();
                self.persist(&item).await?;
                return Ok(item.clone());
            }
            Decision::Accept => (item.proposed.clone().unwrap_or_default(), ReviewStatus::Accepted),
            Decision::Edit => {
                let text = req.edited_text.as_deref().ok_or_else(|| ServiceError::Unprocessable {
                    message: "edit requires edited_text".into(),
                    detail: None,
                })?;
                let block = validate_extract(text).map_err(|e| ServiceError::Unprocessable {
                    message: "edited text is not a valid JavaDoc block".into(),
                    detail: Some(e.to_string()),
                })?;
                (block, ReviewStatus::Edited)
            }
        };

        let _write = self.source_writes.lock().await;
        let path = self.ws.source_path(&item.file);
        let current =
            std::fs::read_to_string(&path).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))?;
        // Re-parse so earlier edits elsewhere in the file do not invalidate
        // this review; only a change to the method itself does.
        let parsed = parse_file(&SourceFile::new(item.file.clone(), current.clone()));
        let decl = parsed
            .methods
            .iter()
            .find(|m| m.id == item.method)
            .filter(|m| sha256_hex(&[&m.signature_text, &m.body_text]) == item.source_hash)
            .ok_or_else(|| ServiceError::Conflict(format!("{} changed on disk since generation", item.method)))?;
        let formatted = format_javadoc(&comment, &decl.indent);
        let patched = plan_patch(decl, &formatted, &current)
            .and_then(|p| apply_patch(&current, &p))
            .map_err(|e| ServiceError::Conflict(e.to_string()))?;
        write_atomic(&path, &patched).map_err(|e| ServiceError::Internal(e.to_string()))?;

        item.diff = Some(unified_diff(&item.file, &current, &patched));
        item.proposed = Some(formatted);
        item.status = status;
        item.updated_at = Utc::now();
        self.persist(&item).await?;
        Ok(item.clone())
    }

    pub async fn record_feedback(&self, req: FeedbackRequest) -> Result<FeedbackRecord, ServiceError> {
        if !(1..=5).contains(&req.rating) {
            return Err(ServiceError::Unprocessable {
                message: format!("rating {} out of range 1..5", req.rating),
                detail: None,
            });
        }
        let record = FeedbackRecord {
            timestamp: Utc::now(),
            model: req.model,
            rating: req.rating as u8,
            text: req.text,
            review_id: req.review_id,
        };
        let line = serde_json::to_string(&record).expect("serializable");
        let _guard = self.feedback_log.lock().await;
        append_line(&self.feedback_path(), &line).map_err(|e| ServiceError::Internal(e.to_string()))?;
        Ok(record)
    }

    pub async fn list_reviews(&self) -> Vec<ReviewItem> {
        let slots: Vec<_> = self.reviews.read().await.values().cloned().collect();
        let mut out = Vec::with_capacity(slots.len());
        for s in slots {
            out.push(s.lock().await.clone());
        }
        out.sort_by(|a, b| a.created_at.cmp(&b.created_at).then(a.id.cmp(&b.id)));
        out
    }

    pub async fn get_review(&self, id: &str) -> Result<ReviewItem, ServiceError> {
        let slot = self.review(id).await?;
        let item = slot.lock().await;
        Ok(item.clone())
    }
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn methods(State(s): State<Arc<AppState>>, Query(q): Query<MethodsQuery>) -> Json<Vec<MethodInfo>> {
    let list = s
        .ws
        .index
        .methods
        .values()
        .filter(|m| q.package.as_deref().is_none_or(|p| m.package == p))
        .map(|m| MethodInfo {
            method_id: m.id.clone(),
            package: m.package.clone(),
            file: m.file.clone(),
            line: m.line,
            has_doc: m.doc_comment.is_some(),
        })
        .collect();
    Json(list)
}

fn parse_method(s: &AppState, text: &str) -> Result<MethodId, ServiceError> {
    let id: MethodId = text.parse().map_err(|e| ServiceError::BadRequest(format!("{e}")))?;
    if s.ws.index.get(&id).is_none() {
        return Err(ServiceError::NotFound(format!("unknown method {id}")));
    }
    Ok(id)
}

async fn generate(
    State(s): State<Arc<AppState>>,
    Json(req): Json<GenerateRequest>,
) -> Result<(StatusCode, Json<serde_json::Value>), ServiceError> {
    let id = parse_method(&s, &req.method_id)?;
    let review_id = s.start_generation(id).await?;
    Ok((StatusCode::ACCEPTED, Json(serde_json::json!({ "review_id": review_id }))))
}

async fn list_reviews(State(s): State<Arc<AppState>>) -> Json<Vec<ReviewItem>> {
    Json(s.list_reviews().await)
}

async fn get_review(State(s): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<ReviewItem>, ServiceError> {
    Ok(Json(s.get_review(&id).await?))
}

async fn decide(
    State(s): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<DecisionRequest>,
) -> Result<Json<ReviewItem>, ServiceError> {
    Ok(Json(s.decide(&id, req).await?))
}

async fn feedback(
    State(s): State<Arc<AppState>>,
    Json(req): Json<FeedbackRequest>,
) -> Result<(StatusCode, Json<FeedbackRecord>), ServiceError> {
    Ok((StatusCode::CREATED, Json(s.record_feedback(req).await?)))
}

async fn graph(
    State(s): State<Arc<AppState>>,
    UrlPath(raw): UrlPath<String>,
) -> Result<Json<crate::graph::RootedGraph>, ServiceError> {
    let id = parse_method(&s, raw.trim_start_matches('/'))?;
    let g = rooted_graph(s.engine.graph(), &id, s.engine.settings().depth_cap)
        .map_err(|e| ServiceError::NotFound(e.to_string()))?;
    Ok(Json(g))
}

async fn placeholder() -> Html<&'static str> {
    Html(PLACEHOLDER_PAGE)
}

/// The full API plus static UI assets from `ui_dir` (or a placeholder page).
pub fn router(state: Arc<AppState>, ui_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/health", get(health))
        .route("/api/methods", get(methods))
        .route("/api/generate", post(generate))
        .route("/api/reviews", get(list_reviews))
        .route("/api/reviews/:id", get(get_review))
        .route("/api/reviews/:id/decision", post(decide))
        .route("/api/feedback", post(feedback))
        .route("/api/graph/*method_id", get(graph))
        .with_state(state);
    match ui_dir.filter(|d| d.join("index.html").is_file()) {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api.route("/", get(placeholder)),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Server(std::io::Error),
    #[error("cannot load review state: {0}")]
    State(std::io::Error),
}

/// Binds `127.0.0.1:port` and serves until the process is stopped.
pub async fn serve(ws: Arc<Workspace>, engine: Engine, port: u16) -> Result<(), ServeError> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })?;
    let ui_dir = ws.config.ui_dir.as_ref().map(|d| ws.resolve_path(d));
    let state = AppState::new(ws, engine).map_err(ServeError::State)?;
    log::info!("review service listening on http://{}", listener.local_addr().unwrap_or(addr));
    axum::serve(listener, router(state, ui_dir.as_deref())).await.map_err(ServeError::Server)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn final_states() {
        assert!(!ReviewStatus::Pending.is_final());
        assert!(!ReviewStatus::Generating.is_final());
        assert!(ReviewStatus::Accepted.is_final());
        assert!(ReviewStatus::Edited.is_final());
    }

    #[test]
    fn feedback_schema_rejects_extra_fields() {
        let line = r#"{"timestamp":"2024-01-01T00:00:00Z","model":"m","rating":3,"text":null,"review_id":"r","user":"x"}"#;
        assert!(serde_json::from_str::<FeedbackRecord>(line).is_err());
    }

    #[test]
    fn feedback_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        assert!(read_feedback(&path).unwrap().is_empty());
        let rec = FeedbackRecord {
            timestamp: Utc::now(),
            model: "m".into(),
            rating: 4,
            text: Some("ok".into()),
            review_id: "r".into(),
        };
        append_line(&path, &serde_json::to_string(&rec).unwrap()).unwrap();
        assert_eq!(read_feedback(&path).unwrap(), vec![rec]);
    }
}
