use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::java::{MethodDecl, MethodId};

const BUILTIN_TEMPLATE: &str = include_str!("../../templates/prompt_v1.toml");

pub const NO_CALLEES: &str = "(no project-internal callees)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub version: String,
    pub summary_system: String,
    pub summary_user: String,
    pub comment_system: String,
    pub comment_user: String,
    /// SHA-256 of the template source, hex.
    #[serde(skip)]
    pub hash: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("cannot read template {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid template: {0}")]
    Parse(#[from] toml::de::Error),
}

impl PromptTemplate {
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_TEMPLATE).expect("builtin template parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, TemplateError> {
        let mut t: PromptTemplate = toml::from_str(text)?;
        t.hash = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| TemplateError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }
}

/// Whitespace-delimited words × 1.3, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    let words = text.split_whitespace().count();
    (words * 13).div_ceil(10)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "snake_case")]
pub enum ContextContent {
    Summary(String),
    /// Signature line of a method that has no summary.
    Stub(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub method: MethodId,
    pub depth: usize,
    pub content: ContextContent,
}

impl ContextEntry {
    pub fn render(&self) -> String {
        match &self.content {
            ContextContent::Summary(text) => format!("- {}: {}", self.method, text),
            ContextContent::Stub(sig) => format!("- {}: [signature only] {}", self.method, sig),
        }
    }

    pub fn is_stub(&self) -> bool {
        matches!(self.content, ContextContent::Stub(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_message: String,
    pub user_message: String,
    pub context_entries: Vec<ContextEntry>,
    /// Entries removed to fit the token budget.
    pub dropped: Vec<MethodId>,
    pub token_estimate: usize,
}

pub fn render_context(entries: &[ContextEntry], dropped: usize) -> String {
    if entries.is_empty() && dropped == 0 {
        return NO_CALLEES.to_string();
    }
    let mut lines: Vec<String> = entries.iter().map(ContextEntry::render).collect();
    if entries.is_empty() {
        lines.push(NO_CALLEES.to_string());
    }
    if dropped > 0 {
        lines.push(format!("({dropped} deeper entries omitted)"));
    }
    lines.join("\n")
}

/// Single-pass `{key}` substitution; inserted values are never rescanned.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    'outer: while let Some(pos) = rest.find('{') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        for (key, value) in vars {
            let token = format!("{{{key}}}");
            if rest.starts_with(&token) {
                out.push_str(value);
                rest = &rest[token.len()..];
                continue 'outer;
            }
        }
        out.push('{');
        rest = &rest[1..];
    }
    out.push_str(rest);
    out
}

fn build(
    system: &str,
    user_template: &str,
    target: &MethodDecl,
    mut entries: Vec<ContextEntry>,
    budget: usize,
) -> PromptBundle {
    let source = target.source_text();
    let mut dropped = Vec::new();
    loop {
        let context = render_context(&entries, dropped.len());
        let user = render(
            user_template,
            &[("method_id", target.id.as_str()), ("source", &source), ("context", &context)],
        );
        let estimate = estimate_tokens(system) + estimate_tokens(&user);
        if estimate <= budget || entries.is_empty() {
            return PromptBundle {
                system_message: system.to_string(),
                user_message: user,
                context_entries: entries,
                dropped,
                token_estimate: estimate,
            };
        }
        // Deepest first; among equals, the earliest-visited goes first.
        let victim = entries
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.depth.cmp(&b.depth).then(j.cmp(i)))
            .map(|(i, _)| i)
            .expect("non-empty");
        dropped.push(entries.remove(victim).method);
    }
}

/// Prompt for the final JavaDoc of `target`. `entries` must already be in
/// visiting order.
pub fn assemble_prompt(
    target: &MethodDecl,
    entries: Vec<ContextEntry>,
    template: &PromptTemplate,
    budget: usize,
) -> PromptBundle {
    build(&template.comment_system, &template.comment_user, target, entries, budget)
}

/// Prompt for the plain-text summary of a callee.
pub fn assemble_summary_prompt(
    target: &MethodDecl,
    entries: Vec<ContextEntry>,
    template: &PromptTemplate,
    budget: usize,
) -> PromptBundle {
    build(&template.summary_system, &template.summary_user, target, entries, budget)
}

/// Reduces a model reply to a one-paragraph summary within `token_budget`.
/// Returns `None` when nothing usable is left.
pub fn clean_summary(raw: &str, token_budget: usize) -> Option<String> {
    let mut words: Vec<&str> = Vec::new();
    for line in raw.lines() {
        let line = line.trim();
        if line.starts_with("```") {
            continue;
        }
        let line = line.trim_start_matches("/**").trim_end_matches("*/").trim_start_matches('*');
        words.extend(line.split_whitespace());
    }
    let max_words = (token_budget * 10) / 13;
    words.truncate(max_words);
    (!words.is_empty()).then(|| words.join(" "))
}
