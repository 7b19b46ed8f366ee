//! Structural Java parser.
//!
//! Recognizes type declarations, method declarations and call expressions
//! over the token stream. It does not build an AST and does not resolve
//! types; anything it cannot classify is skipped.

use super::lexer::{tokenize, Token, TokenKind};
use super::{line_of, CallSite, Diagnostic, MethodDecl, MethodId, ParsedFile, SourceFile};

const TYPE_KEYWORDS: &[&str] = &["class", "interface", "enum", "record"];

/// Identifiers followed by `(` that are not method calls.
const NON_CALL_KEYWORDS: &[&str] = &[
    "if", "for", "while", "switch", "catch", "synchronized", "return", "throw", "new", "super",
    "this", "assert", "try", "else", "do", "case", "yield", "instanceof", "default",
];

const MODIFIERS: &[&str] = &[
    "public", "protected", "private", "static", "final", "abstract", "synchronized", "native",
    "strictfp", "transient", "volatile", "default", "sealed", "non-sealed",
];

/// Reads the `package` declaration, or returns an empty string.
pub fn package_of(text: &str) -> String {
    let (tokens, _) = tokenize(text);
    let code: Vec<&Token> = tokens.iter().filter(|t| !t.is_trivia()).collect();
    let mut i = 0;
    // Annotations may precede the package declaration (package-info.java).
    while i < code.len() && code[i].text(text) == "@" {
        i += 2;
        if code.get(i).is_some_and(|t| t.text(text) == "(") {
            let mut depth = 0;
            while i < code.len() {
                match code[i].text(text) {
                    "(" => depth += 1,
                    ")" => {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
        }
    }
    if code.get(i).map(|t| t.text(text)) != Some("package") {
        return String::new();
    }
    let mut name = String::new();
    for t in &code[i + 1..] {
        match t.text(text) {
            ";" => break,
            s => name.push_str(s),
        }
    }
    name
}

pub fn parse_file(source: &SourceFile) -> ParsedFile {
    let (tokens, issues) = tokenize(&source.text);
    let mut parser = Parser::new(source, tokens);
    for issue in issues {
        parser.diag(issue.offset, issue.message.to_string());
    }
    parser.parse_unit();
    parser.finish()
}

#[derive(Debug, Clone)]
struct TypeScope {
    fqn: String,
}

struct Parser<'a> {
    src: &'a str,
    path: &'a str,
    package: String,
    tokens: Vec<Token>,
    /// Indices into `tokens` of non-comment tokens.
    code: Vec<usize>,
    pos: usize,
    out: ParsedFile,
}

enum HeaderEnd {
    Brace,
    Semicolon,
    Assign,
    CloseBrace,
    Eof,
}

struct Header {
    start: usize,
    /// Exclusive index of the terminator.
    end: usize,
    /// Code indices covered by annotations (`@Name(args)`).
    annotation: Vec<bool>,
    terminator: HeaderEnd,
}

impl<'a> Parser<'a> {
    fn new(source: &'a SourceFile, tokens: Vec<Token>) -> Self {
        let code = tokens.iter().enumerate().filter(|(_, t)| !t.is_trivia()).map(|(i, _)| i).collect();
        Self {
            src: &source.text,
            path: &source.path,
            package: source.package_name.clone(),
            tokens,
            code,
            pos: 0,
            out: ParsedFile::default(),
        }
    }

    fn finish(mut self) -> ParsedFile {
        if self.out.methods.is_empty()
            && !self.src.trim().is_empty()
            && !self.out.diagnostics.is_empty()
        {
            self.out.calls.clear();
            self.diag(0, "no methods recovered from file".to_string());
        }
        self.out
    }

    fn diag(&mut self, offset: usize, message: String) {
        self.out.diagnostics.push(Diagnostic {
            path: self.path.to_string(),
            line: line_of(self.src, offset),
            message,
        });
    }

    fn tok(&self, ci: usize) -> &Token {
        &self.tokens[self.code[ci]]
    }

    fn text(&self, ci: usize) -> &'a str {
        let span = self.tokens[self.code[ci]].span.clone();
        &self.src[span]
    }

    fn is(&self, ci: usize, s: &str) -> bool {
        ci < self.code.len() && self.text(ci) == s
    }

    fn is_ident(&self, ci: usize) -> bool {
        ci < self.code.len() && self.tok(ci).kind == TokenKind::Ident
    }

    /// Index of the token closing the group opened at `open`.
    fn matching(&self, open: usize) -> Option<usize> {
        let (o, c) = match self.text(open) {
            "{" => ("{", "}"),
            "(" => ("(", ")"),
            "[" => ("[", "]"),
            _ => return None,
        };
        let mut depth = 0usize;
        for ci in open..self.code.len() {
            let t = self.text(ci);
            if t == o {
                depth += 1;
            } else if t == c {
                depth -= 1;
                if depth == 0 {
                    return Some(ci);
                }
            }
        }
        None
    }

    fn parse_unit(&mut self) {
        let n = self.code.len();
        while self.pos < n {
            let t = self.text(self.pos);
            if t == "package" || t == "import" {
                while self.pos < n && !self.is(self.pos, ";") {
                    self.pos += 1;
                }
                self.pos += 1;
                continue;
            }
            if !self.parse_member(None) {
                break;
            }
        }
    }

    /// Parses members of a type body until its closing brace.
    fn parse_body(&mut self, scope: &TypeScope, is_enum: bool) {
        if is_enum {
            self.skip_enum_constants();
        }
        while self.pos < self.code.len() {
            if self.is(self.pos, "}") {
                self.pos += 1;
                return;
            }
            if !self.parse_member(Some(scope)) {
                return;
            }
        }
        let offset = self.src.len();
        self.diag(offset, format!("unterminated body of type {}", scope.fqn));
    }

    fn skip_enum_constants(&mut self) {
        while self.pos < self.code.len() {
            match self.text(self.pos) {
                ";" => {
                    self.pos += 1;
                    return;
                }
                "}" => return,
                "(" | "{" => match self.matching(self.pos) {
                    Some(close) => self.pos = close + 1,
                    None => {
                        self.pos = self.code.len();
                        return;
                    }
                },
                _ => self.pos += 1,
            }
        }
    }

    fn scan_header(&self) -> Header {
        let start = self.pos;
        let mut annotation = Vec::new();
        let mut ci = start;
        let mut depth = 0usize;
        loop {
            if ci >= self.code.len() {
                return Header { start, end: ci, annotation, terminator: HeaderEnd::Eof };
            }
            let t = self.text(ci);
            if depth == 0 && t == "@" && !self.is(ci + 1, "interface") {
                let ann_start = ci;
                ci += 1;
                while self.is_ident(ci) && self.is(ci + 1, ".") {
                    ci += 2;
                }
                if self.is_ident(ci) {
                    ci += 1;
                }
                if self.is(ci, "(") {
                    ci = self.matching(ci).map_or(self.code.len(), |c| c + 1);
                }
                annotation.resize(ci - start, false);
                for flag in &mut annotation[ann_start - start..] {
                    *flag = true;
                }
                continue;
            }
            match t {
                "(" | "[" => depth += 1,
                ")" | "]" => depth = depth.saturating_sub(1),
                "{" if depth == 0 => {
                    annotation.resize(ci - start, false);
                    return Header { start, end: ci, annotation, terminator: HeaderEnd::Brace };
                }
                ";" if depth == 0 => {
                    annotation.resize(ci - start, false);
                    return Header { start, end: ci, annotation, terminator: HeaderEnd::Semicolon };
                }
                "=" if depth == 0 => {
                    annotation.resize(ci - start, false);
                    return Header { start, end: ci, annotation, terminator: HeaderEnd::Assign };
                }
                "}" if depth == 0 => {
                    annotation.resize(ci - start, false);
                    return Header { start, end: ci, annotation, terminator: HeaderEnd::CloseBrace };
                }
                _ => {}
            }
            ci += 1;
        }
    }

    /// Parses one member (or top-level declaration). Returns false at EOF or
    /// on an unrecoverable region.
    fn parse_member(&mut self, scope: Option<&TypeScope>) -> bool {
        let header = self.scan_header();
        let is_ann = |ci: usize| header.annotation.get(ci - header.start).copied().unwrap_or(false);

        match header.terminator {
            HeaderEnd::Eof => {
                if header.end > header.start {
                    let offset = self.tok(header.start).span.start;
                    self.diag(offset, "unexpected end of input in declaration".to_string());
                }
                self.pos = self.code.len();
                return false;
            }
            HeaderEnd::CloseBrace => {
                if header.end == header.start {
                    // Stray `}` at top level.
                    if scope.is_none() {
                        let offset = self.tok(self.pos).span.start;
                        self.diag(offset, "unbalanced `}`".to_string());
                        self.pos += 1;
                    }
                    return scope.is_some() || self.pos < self.code.len();
                }
                let offset = self.tok(header.start).span.start;
                self.diag(offset, "incomplete declaration before `}`".to_string());
                self.pos = header.end;
                return true;
            }
            HeaderEnd::Semicolon => {
                self.pos = header.end + 1;
                return true;
            }
            HeaderEnd::Assign => {
                self.skip_initializer(header.end + 1);
                return true;
            }
            HeaderEnd::Brace => {}
        }

        // Type declaration?
        let type_kw = (header.start..header.end).find(|&ci| {
            !is_ann(ci)
                && TYPE_KEYWORDS.contains(&self.text(ci))
                && self.is_ident(ci + 1)
                && !(ci > header.start && self.is(ci - 1, "."))
        });
        if let Some(kw) = type_kw {
            let name = self.text(kw + 1).to_string();
            let fqn = match scope {
                Some(outer) => format!("{}.{}", outer.fqn, name),
                None if self.package.is_empty() => name.clone(),
                None => format!("{}.{}", self.package, name),
            };
            let inner = TypeScope { fqn };
            self.pos = header.end + 1;
            self.parse_body(&inner, self.text(kw) == "enum");
            return true;
        }

        let Some(close) = self.matching(header.end) else {
            let offset = self.tok(header.end).span.start;
            self.diag(offset, "unbalanced `{`".to_string());
            self.pos = self.code.len();
            return false;
        };
        self.pos = close + 1;

        let Some(scope) = scope else {
            return true;
        };

        let open_paren = (header.start..header.end).find(|&ci| !is_ann(ci) && self.is(ci, "("));
        let Some(open_paren) = open_paren else {
            // Initializer block, compact record constructor, or something unrecognized.
            return true;
        };
        if open_paren == header.start || !self.is_ident(open_paren - 1) {
            return true;
        }
        let name_ci = open_paren - 1;

        // Constructors have no return type: only modifiers, annotations and
        // type parameters precede the name.
        let has_return_type = self.has_return_type(header.start, name_ci, &is_ann);
        if !has_return_type {
            return true;
        }

        let Some(close_paren) = self.matching(open_paren) else {
            return true;
        };
        self.record_method(scope, &header, name_ci, open_paren, close_paren, header.end, close);
        true
    }

    fn has_return_type(&self, start: usize, name_ci: usize, is_ann: &dyn Fn(usize) -> bool) -> bool {
        let mut ci = start;
        let mut angle = 0i32;
        while ci < name_ci {
            let t = self.text(ci);
            if is_ann(ci) {
                ci += 1;
                continue;
            }
            match t {
                "<" => angle += 1,
                ">" => angle -= 1,
                _ if angle > 0 => {}
                _ if MODIFIERS.contains(&t) => {}
                _ => return true,
            }
            ci += 1;
        }
        false
    }

    fn skip_initializer(&mut self, mut ci: usize) {
        while ci < self.code.len() {
            match self.text(ci) {
                ";" => {
                    self.pos = ci + 1;
                    return;
                }
                "}" => {
                    self.pos = ci;
                    return;
                }
                "{" | "(" | "[" => match self.matching(ci) {
                    Some(c) => ci = c + 1,
                    None => break,
                },
                _ => ci += 1,
            }
        }
        self.pos = self.code.len();
    }

    #[allow(clippy::too_many_arguments)]
    fn record_method(
        &mut self,
        scope: &TypeScope,
        header: &Header,
        name_ci: usize,
        open_paren: usize,
        close_paren: usize,
        body_open: usize,
        body_close: usize,
    ) {
        let src = self.src;
        let name = self.text(name_ci).to_string();
        let param_types = self.param_types(open_paren, close_paren);
        let arity = param_types.len();
        let id = MethodId::new(&scope.fqn, &name, arity);

        let sig_start = self.tok(header.start).span.start;
        let sig_end = self.tok(header.end - 1).span.end;
        let body_span = self.tok(body_open).span.start..self.tok(body_close).span.end;

        // A doc comment belongs to the member only if nothing but whitespace
        // separates it from the header's first token.
        let first_tok = self.code[header.start];
        let (doc_comment, doc_span) = match first_tok.checked_sub(1).map(|i| &self.tokens[i]) {
            Some(t) if t.kind == TokenKind::DocComment => {
                (Some(t.text(src).to_string()), Some(t.span.clone()))
            }
            _ => (None, None),
        };

        let line_start = src[..sig_start].rfind('\n').map_or(0, |i| i + 1);
        let indent: String =
            src[line_start..].chars().take_while(|c| *c == ' ' || *c == '\t').collect();

        let decl = MethodDecl {
            id: id.clone(),
            file: self.path.to_string(),
            package: self.package.clone(),
            class_fqn: scope.fqn.clone(),
            name,
            arity,
            param_types,
            line: line_of(src, self.tok(name_ci).span.start),
            signature_span: sig_start..sig_end,
            signature_text: src[sig_start..sig_end].to_string(),
            body_text: src[body_span.clone()].to_string(),
            body_span,
            doc_comment,
            doc_span,
            indent,
        };
        self.out.methods.push(decl);
        self.collect_calls(&id, body_open + 1, body_close);
    }

    fn param_types(&self, open: usize, close: usize) -> Vec<String> {
        if close == open + 1 {
            return Vec::new();
        }
        let mut params = Vec::new();
        let mut current: Vec<usize> = Vec::new();
        let mut depth = 0i32;
        for ci in open + 1..close {
            let t = self.text(ci);
            match t {
                "<" | "(" | "[" => depth += 1,
                ">" | ")" | "]" => depth -= 1,
                "," if depth == 0 => {
                    params.push(self.param_type(&current));
                    current.clear();
                    continue;
                }
                _ => {}
            }
            current.push(ci);
        }
        params.push(self.param_type(&current));
        params
    }

    /// Type text of one parameter: annotations and `final` dropped, the
    /// trailing name removed.
    fn param_type(&self, toks: &[usize]) -> String {
        let mut parts: Vec<&str> = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            let t = self.text(toks[i]);
            if t == "@" {
                i += 2;
                while i + 1 < toks.len() && self.text(toks[i]) == "." {
                    i += 2;
                }
                if i < toks.len() && self.text(toks[i]) == "(" {
                    let mut depth = 0;
                    while i < toks.len() {
                        match self.text(toks[i]) {
                            "(" => depth += 1,
                            ")" => {
                                depth -= 1;
                                if depth == 0 {
                                    i += 1;
                                    break;
                                }
                            }
                            _ => {}
                        }
                        i += 1;
                    }
                }
                continue;
            }
            if t != "final" {
                parts.push(t);
            }
            i += 1;
        }
        // Drop the parameter name (and any C-style `[]` after it).
        while parts.last().is_some_and(|p| *p == "]" || *p == "[") {
            parts.pop();
        }
        parts.pop();
        let mut out = String::new();
        for (k, p) in parts.iter().enumerate() {
            let prev_ident = k > 0 && parts[k - 1].chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '$');
            let cur_ident = p.chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '$');
            if prev_ident && cur_ident {
                out.push(' ');
            }
            out.push_str(p);
        }
        out
    }

    fn collect_calls(&mut self, caller: &MethodId, from: usize, to: usize) {
        let mut ci = from;
        while ci < to {
            if !(self.is_ident(ci) && self.is(ci + 1, "(")) {
                ci += 1;
                continue;
            }
            let name = self.text(ci);
            let prev = if ci > from { Some(self.text(ci - 1)) } else { None };
            if NON_CALL_KEYWORDS.contains(&name) || prev == Some("@") || self.is_constructor_call(ci, from) {
                ci += 1;
                continue;
            }
            let Some(close) = self.matching(ci + 1).filter(|&c| c < to) else {
                ci += 1;
                continue;
            };
            // `name(...) {` or `name(...) throws` inside a body is a local or
            // anonymous-class method declaration.
            if self.is(close + 1, "{") || self.is(close + 1, "throws") {
                ci += 1;
                continue;
            }
            let receiver_hint = if prev == Some(".") && ci >= from + 2 && self.is_ident(ci - 2) {
                Some(self.text(ci - 2).to_string())
            } else {
                None
            };
            let arity = self.argument_count(ci + 1, close);
            self.out.calls.push(CallSite {
                caller: caller.clone(),
                callee_name: name.to_string(),
                callee_arity: arity,
                receiver_hint,
                span: self.tok(ci).span.start..self.tok(close).span.end,
            });
            ci += 1;
        }
    }

    fn is_constructor_call(&self, name_ci: usize, floor: usize) -> bool {
        let mut ci = name_ci;
        while ci >= floor + 2 && self.is(ci - 1, ".") && self.is_ident(ci - 2) {
            ci -= 2;
        }
        ci > floor && self.is(ci - 1, "new")
    }

    fn argument_count(&self, open: usize, close: usize) -> usize {
        if close == open + 1 {
            return 0;
        }
        let mut depth = 0i32;
        let mut commas = 0;
        for ci in open + 1..close {
            match self.text(ci) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                "," if depth == 0 => commas += 1,
                _ => {}
            }
        }
        commas + 1
    }
}
