use std::sync::LazyLock;

use regex::Regex;

/// First `/** ... */` block, shortest match, spanning lines.
static JAVADOC_BLOCK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)/\*\*.*?\*/").expect("valid regex"));

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("no `/** ... */` block found in response")]
    NoMatch,
    #[error("comment block has no content")]
    Empty,
    #[error("comment block is malformed: {0}")]
    Malformed(&'static str),
}

/// Pulls the first JavaDoc block out of a model response. Surrounding prose
/// and markdown fences are ignored.
pub fn validate_extract(raw: &str) -> Result<String, ValidationError> {
    let block = JAVADOC_BLOCK.find(raw).ok_or(ValidationError::NoMatch)?.as_str();
    check_structure(block)?;
    Ok(block.to_string())
}

pub fn check_structure(block: &str) -> Result<(), ValidationError> {
    if !block.starts_with("/**") {
        return Err(ValidationError::Malformed("does not start with `/**`"));
    }
    if !block.ends_with("*/") || block.len() < 5 {
        return Err(ValidationError::Malformed("does not end with `*/`"));
    }
    let inner = &block[3..block.len() - 2];
    if inner.contains("*/") {
        return Err(ValidationError::Malformed("contains a nested `*/`"));
    }
    if !inner.chars().any(|c| !c.is_whitespace() && c != '*') {
        return Err(ValidationError::Empty);
    }
    Ok(())
}
