//! Chat-completion backends: an OpenAI-compatible HTTP client and a
//! deterministic mock with a call log.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::java::MethodId;

pub const API_KEY_ENV: &str = "SMARTDOC_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("remote error {status}: {body}")]
    Remote { status: u16, body: String },
    #[error("unexpected response shape: {0}")]
    Protocol(String),
}

/// What a request is for. Not sent over the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Summary,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatRequest {
    pub purpose: Purpose,
    pub subject: MethodId,
    pub system: String,
    pub user: String,
}

#[async_trait]
pub trait LlmBackend: Send + Sync {
    fn model(&self) -> &str;

    async fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

#[derive(Debug, Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: [WireMessage<'a>; 2],
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireContent,
}

#[derive(Debug, Deserialize)]
struct WireContent {
    content: Option<String>,
}

/// Client for an OpenAI-compatible `chat/completions` endpoint.
pub struct HttpBackend {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        temperature: f64,
        timeout: Duration,
        api_key: Option<String>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { client, endpoint: endpoint.into(), model: model.into(), temperature, api_key })
    }

    /// Reads the API key from `SMARTDOC_API_KEY`, if set.
    pub fn api_key_from_env() -> Option<String> {
        std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
    }
}

#[async_trait]
impl LlmBackend for HttpBackend {
    fn model(&self) -> &str {
        &self.model
    }

    async fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let body = WireRequest {
            model: &self.model,
            messages: [
                WireMessage { role: "system", content: &request.system },
                WireMessage { role: "user", content: &request.user },
            ],
            temperature: self.temperature,
        };
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(map_reqwest)?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().await.unwrap_or_default();
            return Err(BackendError::Remote { status: status.as_u16(), body });
        }
        let parsed: WireResponse = resp.json().await.map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Protocol(e.to_string())
            }
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Protocol("no choices[0].message.content".to_string()))
    }
}

fn map_reqwest(e: reqwest::Error) -> BackendError {
    if e.is_timeout() {
        BackendError::Timeout
    } else {
        BackendError::Transport(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockCall {
    pub purpose: Purpose,
    pub subject: MethodId,
    pub system: String,
    pub user: String,
}

/// Response table for [`MockBackend`], loadable from JSON.
///
/// `{id}` and `{name}` in the defaults expand to the method id and simple
/// name. Scripted lists are consumed front to back; the last entry repeats.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockTable {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub summaries: HashMap<String, Vec<String>>,
    #[serde(default)]
    pub comments: HashMap<String, Vec<String>>,
    #[serde(default)]
    pub default_summary: Option<String>,
    #[serde(default)]
    pub default_comment: Option<String>,
}

pub const MOCK_DEFAULT_SUMMARY: &str = "Summary of {id}: performs the {name} step.";
pub const MOCK_DEFAULT_COMMENT: &str = "/**\n * Performs the {name} operation.\n */";

/// Deterministic backend for tests and offline runs.
pub struct MockBackend {
    model: String,
    scripted: Mutex<HashMap<(Purpose, MethodId), VecDeque<String>>>,
    failures: Mutex<HashMap<(Purpose, MethodId), BackendError>>,
    default_summary: String,
    default_comment: String,
    delay: Option<Duration>,
    calls: Mutex<Vec<MockCall>>,
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl MockBackend {
    pub fn new() -> Self {
        Self {
            model: "mock".to_string(),
            scripted: Mutex::new(HashMap::new()),
            failures: Mutex::new(HashMap::new()),
            default_summary: MOCK_DEFAULT_SUMMARY.to_string(),
            default_comment: MOCK_DEFAULT_COMMENT.to_string(),
            delay: None,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn from_table(table: MockTable) -> Result<Self, String> {
        let mut mock = Self::new();
        if let Some(model) = table.model {
            mock.model = model;
        }
        if let Some(s) = table.default_summary {
            mock.default_summary = s;
        }
        if let Some(c) = table.default_comment {
            mock.default_comment = c;
        }
        for (purpose, entries) in [(Purpose::Summary, table.summaries), (Purpose::Comment, table.comments)] {
            for (id, responses) in entries {
                let id: MethodId = id.parse().map_err(|e| format!("{e}"))?;
                mock.script(purpose, &id, responses);
            }
        }
        Ok(mock)
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let table: MockTable = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_table(table)
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    /// Every call waits this long first, to force interleaving in tests.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn with_default_comment(mut self, text: impl Into<String>) -> Self {
        self.default_comment = text.into();
        self
    }

    pub fn script<I, S>(&self, purpose: Purpose, id: &MethodId, responses: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let queue: VecDeque<String> = responses.into_iter().map(Into::into).collect();
        if !queue.is_empty() {
            self.scripted.lock().unwrap().insert((purpose, id.clone()), queue);
        }
    }

    pub fn fail(&self, purpose: Purpose, id: &MethodId, error: BackendError) {
        self.failures.lock().unwrap().insert((purpose, id.clone()), error);
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.calls.lock().unwrap().clone()
    }

    pub fn call_count(&self, purpose: Purpose) -> usize {
        self.calls.lock().unwrap().iter().filter(|c| c.purpose == purpose).count()
    }

    pub fn clear_calls(&self) {
        self.calls.lock().unwrap().clear();
    }

    fn respond(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let key = (request.purpose, request.subject.clone());
        if let Some(err) = self.failures.lock().unwrap().get(&key) {
            return Err(err.clone());
        }
        let mut scripted = self.scripted.lock().unwrap();
        if let Some(queue) = scripted.get_mut(&key) {
            let next = if queue.len() > 1 { queue.pop_front() } else { queue.front().cloned() };
            if let Some(text) = next {
                return Ok(text);
            }
        }
        let template = match request.purpose {
            Purpose::Summary => &self.default_summary,
            Purpose::Comment => &self.default_comment,
        };
        Ok(template.replace("{id}", request.subject.as_str()).replace("{name}", request.subject.name()))
    }
}

#[async_trait]
impl LlmBackend for MockBackend {
    fn model(&self) -> &str {
        &self.model
    }

    async fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        self.calls.lock().unwrap().push(MockCall {
            purpose: request.purpose,
            subject: request.subject.clone(),
            system: request.system.clone(),
            user: request.user.clone(),
        });
        match self.delay {
            Some(d) => tokio::time::sleep(d).await,
            None => tokio::task::yield_now().await,
        }
        self.respond(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(purpose: Purpose, id: &str) -> ChatRequest {
        ChatRequest { purpose, subject: id.parse().unwrap(), system: "s".into(), user: "u".into() }
    }

    #[tokio::test]
    async fn defaults_expand_placeholders() {
        let mock = MockBackend::new();
        let out = mock.complete(&req(Purpose::Comment, "p.A#run/0")).await.unwrap();
        assert_eq!(out, "/**\n * Performs the run operation.\n */");
        let out = mock.complete(&req(Purpose::Summary, "p.A#run/0")).await.unwrap();
        assert_eq!(out, "Summary of p.A#run/0: performs the run step.");
        assert_eq!(mock.calls().len(), 2);
    }

    #[tokio::test]
    async fn scripted_sequence_repeats_last() {
        let mock = MockBackend::new();
        let id: MethodId = "p.A#f/1".parse().unwrap();
        mock.script(Purpose::Comment, &id, ["x", "y"]);
        let r = req(Purpose::Comment, "p.A#f/1");
        let mut outs = Vec::new();
        for _ in 0..3 {
            outs.push(mock.complete(&r).await.unwrap());
        }
        assert_eq!(outs, ["x", "y", "y"]);
    }

    #[test]
    fn table_from_json() {
        let table: MockTable = serde_json::from_str(
            r#"{"model":"m1","comments":{"p.A#f/0":["/** hi */"]},"default_summary":"S {name}"}"#,
        )
        .unwrap();
        let mock = MockBackend::from_table(table).unwrap();
        assert_eq!(mock.model(), "m1");
        assert!(serde_json::from_str::<MockTable>(r#"{"bogus":1}"#).is_err());
    }
}
