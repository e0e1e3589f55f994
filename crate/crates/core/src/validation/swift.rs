//! A small Swift lexer and the analyses built on it: declared and referenced
//! symbols, type-level dependencies, and the bundled stub syntax/lint
//! checkers used when no Swift toolchain is available.

use std::collections::{BTreeMap, BTreeSet};

use super::issue::{IssueRecord, IssueSource, Severity};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    /// Backtick-quoted identifier; never a keyword.
    Escaped,
    Number,
    Str,
    Punct(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl Token {
    fn is(&self, c: char) -> bool {
        self.kind == TokenKind::Punct(c)
    }

    fn ident(&self) -> Option<&str> {
        matches!(self.kind, TokenKind::Ident | TokenKind::Escaped).then_some(self.text.as_str())
    }

    fn word(&self, w: &str) -> bool {
        self.kind == TokenKind::Ident && self.text == w
    }
}

pub const KEYWORDS: &[&str] = &[
    "associatedtype", "class", "deinit", "enum", "extension", "fileprivate", "func", "import", "init", "inout",
    "internal", "let", "open", "operator", "private", "protocol", "public", "rethrows", "static", "struct",
    "subscript", "typealias", "var", "break", "case", "continue", "default", "defer", "do", "else", "fallthrough",
    "for", "guard", "if", "in", "repeat", "return", "switch", "where", "while", "as", "Any", "catch", "false", "is",
    "nil", "super", "self", "Self", "throw", "throws", "true", "try",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexError {
    UnterminatedString { line: usize, column: usize },
    UnterminatedComment { line: usize, column: usize },
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.text[self.pos..].chars().nth(n)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.text[self.pos..].starts_with(s)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn bump_n(&mut self, n: usize) {
        for _ in 0..n {
            self.bump();
        }
    }
}

/// Tokenizes Swift source. String interpolations are lexed as code.
pub fn lex(text: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        text,
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    // Open interpolations: paren depth inside each, and the string delimiter
    // to resume afterwards.
    let mut interp: Vec<(usize, &'static str)> = Vec::new();
    while let Some(c) = cur.peek() {
        let (offset, line, column) = (cur.pos, cur.line, cur.column);
        let push = |tokens: &mut Vec<Token>, kind, text: &str| {
            tokens.push(Token {
                kind,
                text: text.to_string(),
                offset,
                line,
                column,
            })
        };
        if c.is_whitespace() {
            cur.bump();
        } else if cur.starts_with("//") {
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
        } else if cur.starts_with("/*") {
            let mut depth = 0;
            loop {
                if cur.starts_with("/*") {
                    depth += 1;
                    cur.bump_n(2);
                } else if cur.starts_with("*/") {
                    depth -= 1;
                    cur.bump_n(2);
                    if depth == 0 {
                        break;
                    }
                } else if cur.bump().is_none() {
                    return Err(LexError::UnterminatedComment { line, column });
                }
            }
        } else if c == '"' || (c == '#' && cur.peek_at(1) == Some('"')) {
            let delim: &'static str = if cur.starts_with("#\"\"\"") {
                "\"\"\"#"
            } else if cur.starts_with("#\"") {
                "\"#"
            } else if cur.starts_with("\"\"\"") {
                "\"\"\""
            } else {
                "\""
            };
            let open_len = delim.len();
            cur.bump_n(open_len);
            lex_string_body(&mut cur, delim, &mut interp, (line, column))?;
            push(&mut tokens, TokenKind::Str, &text[offset..cur.pos]);
        } else if c == '`' {
            cur.bump();
            let start = cur.pos;
            while cur.peek().is_some_and(|c| c != '`' && c != '\n') {
                cur.bump();
            }
            let name = &text[start..cur.pos];
            if cur.peek() == Some('`') {
                cur.bump();
            }
            push(&mut tokens, TokenKind::Escaped, name);
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            while cur.peek().is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '$') {
                cur.bump();
            }
            push(&mut tokens, TokenKind::Ident, &text[offset..cur.pos]);
        } else if c.is_ascii_digit() {
            while cur.peek().is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '.') {
                if cur.peek() == Some('.') && !cur.peek_at(1).is_some_and(|d| d.is_ascii_digit()) {
                    break;
                }
                cur.bump();
            }
            push(&mut tokens, TokenKind::Number, &text[offset..cur.pos]);
        } else {
            cur.bump();
            if let Some((depth, delim)) = interp.last_mut() {
                if c == '(' {
                    *depth += 1;
                } else if c == ')' {
                    *depth -= 1;
                    if *depth == 0 {
                        let delim = *delim;
                        interp.pop();
                        let at = (cur.line, cur.column);
                        lex_string_body(&mut cur, delim, &mut interp, at)?;
                        continue;
                    }
                }
            }
            push(&mut tokens, TokenKind::Punct(c), &text[offset..cur.pos]);
        }
    }
    if !interp.is_empty() {
        return Err(LexError::UnterminatedString {
            line: cur.line,
            column: cur.column,
        });
    }
    Ok(tokens)
}

/// Consumes string content up to `delim`. Returns false when an
/// interpolation was opened instead (lexing continues as code).
fn lex_string_body(
    cur: &mut Cursor<'_>,
    delim: &'static str,
    interp: &mut Vec<(usize, &'static str)>,
    (line, column): (usize, usize),
) -> Result<bool, LexError> {
    let raw = delim.ends_with('#');
    let escape = if raw { "\\#" } else { "\\" };
    loop {
        if cur.starts_with(delim) {
            cur.bump_n(delim.chars().count());
            return Ok(true);
        }
        if cur.starts_with(escape) {
            cur.bump_n(escape.len());
            if cur.peek() == Some('(') {
                cur.bump();
                interp.push((1, delim));
                return Ok(false);
            }
            if !raw {
                cur.bump();
            }
            continue;
        }
        match cur.bump() {
            None => return Err(LexError::UnterminatedString { line, column }),
            Some('\n') if delim.len() == 1 => return Err(LexError::UnterminatedString { line, column }),
            _ => {}
        }
    }
}

fn issue(file: &str, source: IssueSource, severity: Severity, line: usize, col: usize, msg: String) -> IssueRecord {
    IssueRecord::new(file, severity, source, msg).at(line, col)
}

const DECL_KEYWORDS: &[&str] = &["let", "var", "func", "class", "struct", "enum", "protocol", "typealias", "associatedtype"];

/// Stand-in for `swiftc -parse`: delimiter balance, lexical errors,
/// keywords used as identifiers and leftover Java declaration syntax.
pub fn stub_syntax_check(file: &str, text: &str) -> Vec<IssueRecord> {
    let err = |line, col, msg: String| issue(file, IssueSource::Syntax, Severity::Error, line, col, msg);
    let tokens = match lex(text) {
        Ok(t) => t,
        Err(LexError::UnterminatedString { line, column }) => {
            return vec![err(line, column, "unterminated string literal".into())]
        }
        Err(LexError::UnterminatedComment { line, column }) => {
            return vec![err(line, column, "unterminated '/*' comment".into())]
        }
    };
    let mut out = Vec::new();
    let mut stack: Vec<&Token> = Vec::new();
    for t in &tokens {
        let TokenKind::Punct(c) = t.kind else { continue };
        match c {
            '(' | '[' | '{' => stack.push(t),
            ')' | ']' | '}' => {
                let want = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.last() {
                    Some(open) if open.is(want) => {
                        stack.pop();
                    }
                    Some(open) => {
                        out.push(err(t.line, t.column, format!("expected '{}' to match '{}'", closer(open), open.text)));
                        stack.pop();
                    }
                    None => out.push(err(t.line, t.column, format!("extraneous '{c}' at top level"))),
                }
            }
            _ => {}
        }
    }
    for open in stack {
        out.push(err(open.line, open.column, format!("expected '{}' to match this '{}'", closer(open), open.text)));
    }
    for pair in tokens.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.kind == TokenKind::Ident && DECL_KEYWORDS.contains(&a.text.as_str()) && b.kind == TokenKind::Ident && is_keyword(&b.text) {
            out.push(err(
                b.line,
                b.column,
                format!("keyword '{}' cannot be used as an identifier here", b.text),
            ));
        }
        if a.word("new") && b.kind == TokenKind::Ident && b.text.starts_with(char::is_uppercase) {
            out.push(err(a.line, a.column, "consecutive statements on a line must be separated by ';'".into()));
        }
        if matches!(a.text.as_str(), "void" | "boolean") && a.kind == TokenKind::Ident && b.kind == TokenKind::Ident {
            out.push(err(a.line, a.column, format!("cannot find type '{}' in scope", a.text)));
        }
    }
    out.sort();
    out
}

fn closer(open: &Token) -> char {
    match open.text.as_str() {
        "(" => ')',
        "[" => ']',
        _ => '}',
    }
}

pub const MAX_LINE_LENGTH: usize = 120;

/// Stand-in for SwiftLint with three of its default rules.
pub fn stub_lint_check(file: &str, text: &str) -> Vec<IssueRecord> {
    let warn = |line, col, msg: String, rule: &str| issue(file, IssueSource::Lint, Severity::Warning, line, col, msg).rule(rule);
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.ends_with([' ', '\t']) {
            out.push(warn(
                n,
                1,
                "Trailing Whitespace Violation: Lines should not have trailing whitespace".into(),
                "trailing_whitespace",
            ));
        }
        let len = line.chars().count();
        if len > MAX_LINE_LENGTH {
            out.push(warn(
                n,
                1,
                format!("Line Length Violation: Line should be {MAX_LINE_LENGTH} characters or less; currently it has {len} characters"),
                "line_length",
            ));
        }
        let code = line.split("//").next().unwrap_or("").trim_end();
        if code.ends_with(';') && !code.trim_start().starts_with("for") {
            out.push(warn(
                n,
                code.chars().count(),
                "Trailing Semicolon Violation: Lines should not have trailing semicolons".into(),
                "trailing_semicolon",
            ));
        }
    }
    out
}

/// Names introduced by declarations, parameters and patterns.
pub fn declared_names(tokens: &[Token]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut add = |t: &Token| {
        if let Some(name) = t.ident() {
            if t.kind == TokenKind::Escaped || !is_keyword(name) {
                out.insert(name.to_string());
            }
        }
    };
    for (i, t) in tokens.iter().enumerate() {
        let next = tokens.get(i + 1);
        match t.text.as_str() {
            _ if t.kind != TokenKind::Ident => {}
            "class" | "struct" | "enum" | "protocol" | "typealias" | "associatedtype" | "func" | "case" => {
                if let Some(n) = next {
                    add(n);
                }
                if t.text == "case" {
                    // enum case lists: `case a, b, c`
                    let mut j = i + 2;
                    while tokens.get(j).is_some_and(|t| t.is(',')) {
                        if let Some(n) = tokens.get(j + 1) {
                            add(n);
                        }
                        j += 2;
                    }
                }
                // generic parameters
                if tokens.get(i + 2).is_some_and(|t| t.is('<')) {
                    let mut j = i + 3;
                    let mut expect = true;
                    while let Some(g) = tokens.get(j) {
                        if g.is('>') {
                            break;
                        }
                        if expect {
                            add(g);
                        }
                        expect = g.is(',');
                        j += 1;
                    }
                }
            }
            "let" | "var" | "for" => match next {
                Some(n) if n.is('(') => {
                    let mut depth = 0;
                    for p in &tokens[i + 1..] {
                        if p.is('(') {
                            depth += 1;
                        } else if p.is(')') {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        } else {
                            add(p);
                        }
                    }
                }
                Some(n) => add(n),
                None => {}
            },
            "in" => {
                // closure parameters: `{ a, b in` / `{ (a: T) in`
                let mut j = i;
                while j > 0 {
                    j -= 1;
                    let p = &tokens[j];
                    if p.is('{') {
                        for q in &tokens[j + 1..i] {
                            add(q);
                        }
                        break;
                    }
                    if p.is('}') || p.is(';') || p.word("for") {
                        break;
                    }
                }
            }
            _ => {}
        }
        // parameter lists: `func f(label name: T)` and `init(...)`
        if (t.word("func") || t.word("subscript")) || (t.word("init") && next.is_some_and(|n| n.is('(') || n.is('?'))) {
            let start = tokens[i..].iter().position(|x| x.is('(')).map(|p| p + i);
            if let Some(mut j) = start {
                j += 1;
                let mut depth = 1;
                let mut before_colon = true;
                while let Some(p) = tokens.get(j) {
                    let arrow = j > 0 && tokens[j - 1].is('-');
                    if p.is('(') || p.is('[') || p.is('<') {
                        depth += 1;
                    } else if p.is(')') || p.is(']') || (p.is('>') && !arrow) {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    } else if depth == 1 && p.is(',') {
                        before_colon = true;
                    } else if depth == 1 && p.is(':') {
                        before_colon = false;
                    } else if depth == 1 && before_colon {
                        add(p);
                    }
                    j += 1;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub name: String,
    pub line: usize,
    pub column: usize,
    pub offset: usize,
}

/// Call-position identifiers and capitalised type names that are not member
/// accesses or declarations.
pub fn referenced_names(tokens: &[Token]) -> Vec<Reference> {
    let mut out = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Ident || is_keyword(&t.text) {
            continue;
        }
        let prev = i.checked_sub(1).map(|p| &tokens[p]);
        if prev.is_some_and(|p| p.is('.') || p.is('#') || p.is('@') || (p.kind == TokenKind::Ident && DECL_KEYWORDS.contains(&p.text.as_str())) || p.word("case")) {
            continue;
        }
        let next = tokens.get(i + 1);
        let call = next.is_some_and(|n| n.is('('));
        let label = next.is_some_and(|n| n.is(':')) && prev.is_some_and(|p| p.is('(') || p.is(','));
        let type_like = t.text.starts_with(char::is_uppercase);
        if (call || type_like) && !label {
            out.push(Reference {
                name: t.text.clone(),
                line: t.line,
                column: t.column,
                offset: t.offset,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub line: usize,
    pub column: usize,
    /// Token index range covering the inheritance clause and the body.
    pub range: std::ops::Range<usize>,
}

/// Type declarations (`class`, `struct`, `enum`, `protocol`, `extension`).
/// Extensions are reported under the extended name.
pub fn type_declarations(tokens: &[Token]) -> Vec<TypeDecl> {
    let mut out = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if !matches!(t.text.as_str(), "class" | "struct" | "enum" | "protocol" | "extension") || t.kind != TokenKind::Ident {
            continue;
        }
        let prev_dot = i > 0 && tokens[i - 1].is('.');
        let Some(name_tok) = tokens.get(i + 1).filter(|n| n.ident().is_some() && !prev_dot) else { continue };
        if t.text == "class" && matches!(name_tok.text.as_str(), "func" | "var" | "let") {
            continue;
        }
        let Some(open) = tokens[i + 2..].iter().position(|x| x.is('{') || x.is(';') || x.is('}')).map(|p| p + i + 2) else {
            continue;
        };
        if !tokens[open].is('{') {
            continue;
        }
        let mut depth = 0;
        let mut end = tokens.len();
        for (j, x) in tokens.iter().enumerate().skip(open) {
            if x.is('{') {
                depth += 1;
            } else if x.is('}') {
                depth -= 1;
                if depth == 0 {
                    end = j + 1;
                    break;
                }
            }
        }
        out.push(TypeDecl {
            name: name_tok.text.clone(),
            line: name_tok.line,
            column: name_tok.column,
            range: i + 2..end,
        });
    }
    out
}

/// For each declared type, the other declared types it mentions, attributed
/// to the innermost enclosing declaration.
pub fn type_references(tokens: &[Token], known: &BTreeSet<String>) -> BTreeMap<String, BTreeSet<String>> {
    let decls = type_declarations(tokens);
    let mut out: BTreeMap<String, BTreeSet<String>> = decls.iter().map(|d| (d.name.clone(), BTreeSet::new())).collect();
    for (i, t) in tokens.iter().enumerate() {
        let Some(name) = t.ident() else { continue };
        let declaring = i > 0 && matches!(tokens[i - 1].text.as_str(), "class" | "struct" | "enum" | "protocol" | "extension");
        if !known.contains(name) || declaring || (i > 0 && tokens[i - 1].is('.')) {
            continue;
        }
        let owner = decls
            .iter()
            .filter(|d| d.range.contains(&i))
            .min_by_key(|d| d.range.len());
        if let Some(owner) = owner {
            if owner.name != name {
                out.get_mut(&owner.name).unwrap().insert(name.to_string());
            }
        }
    }
    out
}
