//! JavaDoc formatting and idempotent source patching.
//!
//! A [`Patch`] is one splice. It carries a hash of the bytes from the splice
//! start through the end of the method header, so applying it to a file
//! that changed underneath fails instead of corrupting the source.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::java::{MethodDecl, MethodId};

const BLOCK_TAGS: &[&str] = &[
    "@param", "@return", "@returns", "@throws", "@exception", "@see", "@since", "@deprecated",
    "@author", "@version", "@serial",
];

#[derive(Debug, thiserror::Error)]
pub enum PatchError {
    #[error("stale patch for {method}: {reason}")]
    Stale { method: MethodId, reason: String },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub file: String,
    pub method: MethodId,
    /// Existing doc comment with its line break, or an empty range at the
    /// insertion point.
    pub replace_span: Range<usize>,
    pub new_text: String,
    anchor_span: Range<usize>,
    anchor_hash: String,
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Normalizes a validated comment block: `/**` and ` */` on their own lines,
/// every content line prefixed by ` * `, block tags on separate lines.
/// Lines are joined with `\n`; the result is a fixpoint.
pub fn format_javadoc(javadoc: &str, indent: &str) -> String {
    let inner = javadoc.trim();
    let inner = inner.strip_prefix("/**").unwrap_or(inner);
    let inner = inner.strip_suffix("*/").unwrap_or(inner);

    let mut lines: Vec<String> = Vec::new();
    for raw in inner.split('\n') {
        let line = raw.trim_end_matches('\r').trim_start();
        let line = match line.strip_prefix('*') {
            Some(rest) => rest.strip_prefix(' ').unwrap_or(rest),
            None => line,
        };
        lines.extend(split_block_tags(line.trim_end()));
    }
    while lines.first().is_some_and(|l| l.trim().is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }

    let mut out = format!("{indent}/**");
    for line in &lines {
        out.push('\n');
        if line.trim().is_empty() {
            out.push_str(&format!("{indent} *"));
        } else {
            out.push_str(&format!("{indent} * {line}"));
        }
    }
    out.push_str(&format!("\n{indent} */"));
    out
}

/// Splits `text` before every block tag that follows whitespace outside
/// `{...}` inline tags.
fn split_block_tags(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut brace = 0i32;
    let bytes = text.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'{' => brace += 1,
            b'}' => brace -= 1,
            b'@' if brace <= 0 && i > 0 && bytes[i - 1].is_ascii_whitespace() => {
                let is_tag = BLOCK_TAGS.iter().any(|t| {
                    text[i..].starts_with(t)
                        && text[i + t.len()..].chars().next().is_none_or(char::is_whitespace)
                });
                if is_tag && !text[start..i].trim().is_empty() {
                    parts.push(text[start..i].trim_end().to_string());
                    start = i;
                }
            }
            _ => {}
        }
    }
    parts.push(text[start..].to_string());
    parts
}

/// `\r\n` if the file's first line break is CRLF, else `\n`.
pub fn detect_eol(text: &str) -> &'static str {
    match text.find('\n') {
        Some(i) if i > 0 && text.as_bytes()[i - 1] == b'\r' => "\r\n",
        _ => "\n",
    }
}

fn line_start(text: &str, offset: usize) -> usize {
    text[..offset].rfind('\n').map_or(0, |i| i + 1)
}

fn blank(s: &str) -> bool {
    s.chars().all(|c| c == ' ' || c == '\t')
}

/// Plans the replacement of `method`'s doc comment with `formatted` (output
/// of [`format_javadoc`]). Comments go above annotations.
pub fn plan_patch(method: &MethodDecl, formatted: &str, file_text: &str) -> Result<Patch, PatchError> {
    let stale = |reason: &str| PatchError::Stale { method: method.id.clone(), reason: reason.to_string() };
    if file_text.get(method.signature_span.clone()) != Some(method.signature_text.as_str()) {
        return Err(stale("declaration moved or changed since parse"));
    }
    if file_text.get(method.body_span.clone()) != Some(method.body_text.as_str()) {
        return Err(stale("body changed since parse"));
    }
    if let (Some(span), Some(doc)) = (&method.doc_span, &method.doc_comment) {
        if file_text.get(span.clone()) != Some(doc.as_str()) {
            return Err(stale("doc comment changed since parse"));
        }
    }

    let eol = detect_eol(file_text);
    let block = formatted.replace('\n', eol);
    let inline_block = block.strip_prefix(method.indent.as_str()).unwrap_or(&block).to_string();

    let (replace_span, new_text) = match &method.doc_span {
        Some(doc) => {
            let ls = line_start(file_text, doc.start);
            let after = &file_text[doc.end..];
            let trailing = after.len() - after.trim_start_matches([' ', '\t']).len();
            let own_line = blank(&file_text[ls..doc.start]) && after[trailing..].starts_with(eol);
            if own_line {
                (ls..doc.end + trailing + eol.len(), format!("{block}{eol}"))
            } else {
                (doc.clone(), inline_block)
            }
        }
        None => {
            let start = method.signature_span.start;
            let ls = line_start(file_text, start);
            if blank(&file_text[ls..start]) {
                (ls..ls, format!("{block}{eol}"))
            } else {
                (start..start, format!("{inline_block}{eol}{}", method.indent))
            }
        }
    };

    let anchor_span = replace_span.start..method.signature_span.end;
    Ok(Patch {
        file: method.file.clone(),
        method: method.id.clone(),
        anchor_hash: sha256_hex(&file_text[anchor_span.clone()]),
        anchor_span,
        replace_span,
        new_text,
    })
}

pub fn apply_patch(file_text: &str, patch: &Patch) -> Result<String, PatchError> {
    let current = file_text
        .get(patch.anchor_span.clone())
        .ok_or_else(|| PatchError::Stale { method: patch.method.clone(), reason: "span out of range".into() })?;
    if sha256_hex(current) != patch.anchor_hash {
        return Err(PatchError::Stale { method: patch.method.clone(), reason: "span hash mismatch".into() });
    }
    let mut out = String::with_capacity(file_text.len() + patch.new_text.len());
    out.push_str(&file_text[..patch.replace_span.start]);
    out.push_str(&patch.new_text);
    out.push_str(&file_text[patch.replace_span.end..]);
    Ok(out)
}

/// Applies several patches planned against the same text. Spans must not
/// overlap; later splices go first so earlier offsets stay valid.
pub fn apply_patches(file_text: &str, patches: &[Patch]) -> Result<String, PatchError> {
    let mut ordered: Vec<&Patch> = patches.iter().collect();
    ordered.sort_by_key(|p| std::cmp::Reverse(p.replace_span.start));
    let mut text = file_text.to_string();
    for p in ordered {
        text = apply_patch(&text, p)?;
    }
    Ok(text)
}

/// Unified diff with `path` on both header lines, for `patch -p0`.
pub fn unified_diff(path: &str, old: &str, new: &str) -> String {
    similar::TextDiff::from_lines(old, new)
        .unified_diff()
        .context_radius(3)
        .header(path, path)
        .to_string()
}

/// Replaces `path` with `text` via a temp file in the same directory.
pub fn write_atomic(path: &Path, text: &str) -> Result<(), PatchError> {
    use std::io::Write;
    let io = |source| PatchError::Io { path: path.display().to_string(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    if let Ok(meta) = std::fs::metadata(path) {
        tmp.as_file().set_permissions(meta.permissions()).map_err(io)?;
    }
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::java::{parse_file, SourceFile};

    fn method(text: &str, name: &str) -> MethodDecl {
        parse_file(&SourceFile::new("A.java", text))
            .methods
            .into_iter()
            .find(|m| m.name == name)
            .expect("method present")
    }

    #[test]
    fn single_line_block() {
        assert_eq!(format_javadoc("/** X. */", "    "), "    /**\n     * X.\n     */");
    }

    #[test]
    fn formatting_is_idempotent() {
        let once = format_javadoc("/**\n * Adds.\n *\n * @param a left\n */", "  ");
        assert_eq!(format_javadoc(&once, "  "), once);
        assert_eq!(once, "  /**\n   * Adds.\n   *\n   * @param a left\n   */");
    }

    #[test]
    fn tags_move_to_own_lines() {
        let out = format_javadoc("/** Adds {@link Num} values. @param a left operand @return the sum */", "");
        assert_eq!(out, "/**\n * Adds {@link Num} values.\n * @param a left operand\n * @return the sum\n */");
    }

    #[test]
    fn insertion_without_doc() {
        let src = "class A {\n    @Override\n    public void f() {}\n}\n";
        let m = method(src, "f");
        let block = format_javadoc("/** New. */", &m.indent);
        let p = plan_patch(&m, &block, src).unwrap();
        assert_eq!(p.replace_span, 10..10);
        let out = apply_patch(src, &p).unwrap();
        assert_eq!(out, "class A {\n    /**\n     * New.\n     */\n    @Override\n    public void f() {}\n}\n");
    }

    #[test]
    fn replacement_of_existing_doc() {
        let src = "class A {\n  /** Old. */\n  void f() {}\n}\n";
        let m = method(src, "f");
        let block = format_javadoc("/** New. */", &m.indent);
        let out = apply_patch(src, &plan_patch(&m, &block, src).unwrap()).unwrap();
        assert!(!out.contains("Old."));
        assert_eq!(out.matches("New.").count(), 1);
        let again = method(&out, "f");
        assert_eq!(again.doc_comment.as_deref(), Some(block.trim_start()));
    }

    #[test]
    fn reapplying_is_a_no_op() {
        let src = "class A {\n  void f() {}\n}\n";
        let m = method(src, "f");
        let block = format_javadoc("/** Doc. */", &m.indent);
        let once = apply_patch(src, &plan_patch(&m, &block, src).unwrap()).unwrap();
        let m2 = method(&once, "f");
        let twice = apply_patch(&once, &plan_patch(&m2, &block, &once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn crlf_is_preserved() {
        let src = "class A {\r\n  void f() {}\r\n}\r\n";
        let m = method(src, "f");
        let block = format_javadoc("/** Doc. */", &m.indent);
        let out = apply_patch(src, &plan_patch(&m, &block, src).unwrap()).unwrap();
        assert_eq!(out, "class A {\r\n  /**\r\n   * Doc.\r\n   */\r\n  void f() {}\r\n}\r\n");
    }

    #[test]
    fn declaration_sharing_a_line() {
        let src = "class A { void f() {} }";
        let m = method(src, "f");
        let block = format_javadoc("/** Doc. */", &m.indent);
        let once = apply_patch(src, &plan_patch(&m, &block, src).unwrap()).unwrap();
        let m2 = method(&once, "f");
        assert!(m2.doc_comment.is_some());
        let twice = apply_patch(&once, &plan_patch(&m2, &block, &once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn stale_plan_and_apply() {
        let src = "class A {\n  void f() {}\n}\n";
        let m = method(src, "f");
        let block = format_javadoc("/** Doc. */", &m.indent);
        let edited = src.replace("void f() {}", "void f() { x(); }");
        assert!(matches!(plan_patch(&m, &block, &edited), Err(PatchError::Stale { .. })));

        let p = plan_patch(&m, &block, src).unwrap();
        let shifted = format!("// header\n{src}");
        assert!(matches!(apply_patch(&shifted, &p), Err(PatchError::Stale { .. })));
    }

    #[test]
    fn diff_has_p0_headers() {
        let d = unified_diff("src/A.java", "a\nb\n", "a\nx\nb\n");
        assert!(d.starts_with("--- src/A.java\n+++ src/A.java\n@@"));
        assert!(d.contains("+x\n"));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("A.java");
        std::fs::write(&p, "old").unwrap();
        write_atomic(&p, "new").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "new");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
