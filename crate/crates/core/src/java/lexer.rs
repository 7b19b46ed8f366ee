//! Tolerant Java tokenizer.
//!
//! Produces a flat token stream with byte spans. Malformed input never
//! aborts: unterminated literals and comments run to end of input and are
//! reported through [`LexIssue`].

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    /// `/** ... */`
    DocComment,
    /// `/* ... */` and `// ...`
    Comment,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Range<usize>,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.clone()]
    }

    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Comment | TokenKind::DocComment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexIssue {
    pub offset: usize,
    pub message: &'static str,
}

pub fn tokenize(src: &str) -> (Vec<Token>, Vec<LexIssue>) {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut issues = Vec::new();
    let mut i = 0;

    while i < bytes.len() {
        let b = bytes[i];
        let start = i;

        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }

        if b == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Comment, span: start..i });
            continue;
        }

        if b == b'/' && bytes.get(i + 1) == Some(&b'*') {
            // `/**/` is an empty plain comment, not a doc comment.
            let is_doc = bytes.get(i + 2) == Some(&b'*') && bytes.get(i + 3) != Some(&b'/');
            i += 2;
            let mut closed = false;
            while i + 1 < bytes.len() {
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    closed = true;
                    break;
                }
                i += 1;
            }
            if !closed {
                i = bytes.len();
                issues.push(LexIssue { offset: start, message: "unterminated block comment" });
            }
            let kind = if is_doc && closed { TokenKind::DocComment } else { TokenKind::Comment };
            tokens.push(Token { kind, span: start..i });
            continue;
        }

        if b == b'"' {
            if bytes[i..].starts_with(b"\"\"\"") {
                i = scan_text_block(bytes, i, &mut issues);
            } else {
                i = scan_quoted(bytes, i, b'"', &mut issues);
            }
            tokens.push(Token { kind: TokenKind::Str, span: start..i });
            continue;
        }

        if b == b'\'' {
            i = scan_quoted(bytes, i, b'\'', &mut issues);
            tokens.push(Token { kind: TokenKind::Char, span: start..i });
            continue;
        }

        if b.is_ascii_digit() || (b == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            i += 1;
            while i < bytes.len() {
                let c = bytes[i];
                let exp_sign = (c == b'+' || c == b'-')
                    && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P')
                    && !src[start..i].starts_with("0x")
                    && !src[start..i].starts_with("0X");
                if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            tokens.push(Token { kind: TokenKind::Number, span: start..i });
            continue;
        }

        let ch = src[i..].chars().next().expect("in bounds");
        if is_ident_start(ch) {
            i += ch.len_utf8();
            while let Some(c) = src[i..].chars().next() {
                if is_ident_part(c) {
                    i += c.len_utf8();
                } else {
                    break;
                }
            }
            tokens.push(Token { kind: TokenKind::Ident, span: start..i });
            continue;
        }

        // `...` and `::` are the only multi-char punctuators the parser cares about.
        let len = if bytes[i..].starts_with(b"...") {
            3
        } else if bytes[i..].starts_with(b"::") || bytes[i..].starts_with(b"->") {
            2
        } else {
            ch.len_utf8()
        };
        i += len;
        tokens.push(Token { kind: TokenKind::Punct, span: start..i });
    }

    (tokens, issues)
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphabetic()
}

fn is_ident_part(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphanumeric()
}

fn scan_quoted(bytes: &[u8], start: usize, quote: u8, issues: &mut Vec<LexIssue>) -> usize {
    let mut i = start + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b'\n' => {
                issues.push(LexIssue { offset: start, message: "unterminated literal" });
                return i;
            }
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    issues.push(LexIssue { offset: start, message: "unterminated literal" });
    bytes.len()
}

fn scan_text_block(bytes: &[u8], start: usize, issues: &mut Vec<LexIssue>) -> usize {
    let mut i = start + 3;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            i += 2;
            continue;
        }
        if bytes[i..].starts_with(b"\"\"\"") {
            return i + 3;
        }
        i += 1;
    }
    issues.push(LexIssue { offset: start, message: "unterminated text block" });
    bytes.len()
}
