use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use tree_sitter::{Node, Parser};

use super::{Language, SourceFile, Span};
use crate::error::{Error, Result};

/// Grammar symbol used for nodes tree-sitter inserted to recover from a
/// missing token.
pub const MISSING_KIND: &str = "MISSING";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: String,
    /// Field name this node occupies in its parent, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub span: Span,
    /// True for `ERROR` and `MISSING` recovery nodes.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub error: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<AstNode>,
}

impl AstNode {
    pub fn child_by_field(&self, field: &str) -> Option<&AstNode> {
        self.children.iter().find(|c| c.field.as_deref() == Some(field))
    }

    pub fn children_of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a AstNode> + 'a {
        self.children.iter().filter(move |c| c.kind == kind)
    }

    /// Pre-order traversal including `self`.
    pub fn walk(&self) -> Vec<&AstNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.children.iter().rev());
        }
        out
    }

    pub fn has_error(&self) -> bool {
        self.walk().iter().any(|n| n.error)
    }

    /// Copy of the subtree with every span shifted so that this node starts
    /// at offset zero.
    pub fn relative(&self) -> AstNode {
        self.shifted(self.span.start)
    }

    fn shifted(&self, base: usize) -> AstNode {
        AstNode {
            kind: self.kind.clone(),
            field: self.field.clone(),
            span: Span::new(self.span.start - base, self.span.end - base),
            error: self.error,
            children: self.children.iter().map(|c| c.shifted(base)).collect(),
        }
    }

    /// Structural equality ignoring absolute position and the field name of
    /// the two roots.
    pub fn same_shape(&self, other: &AstNode) -> bool {
        let mut a = self.relative();
        let mut b = other.relative();
        a.field = None;
        b.field = None;
        a == b
    }

    /// S-expression rendering limited to `max_depth` levels below this node.
    pub fn to_sexp(&self, max_depth: usize) -> String {
        let mut out = String::new();
        self.write_sexp(&mut out, 0, max_depth);
        out
    }

    fn write_sexp(&self, out: &mut String, depth: usize, max_depth: usize) {
        if depth > 0 {
            out.push('\n');
            out.push_str(&"  ".repeat(depth));
        }
        out.push('(');
        if let Some(field) = &self.field {
            let _ = write!(out, "{field}: ");
        }
        out.push_str(&self.kind);
        if depth < max_depth {
            for child in &self.children {
                child.write_sexp(out, depth + 1, max_depth);
            }
        } else if !self.children.is_empty() {
            out.push_str(" ...");
        }
        out.push(')');
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ast {
    pub root: AstNode,
    pub source: SourceFile,
}

impl Ast {
    pub fn text(&self, node: &AstNode) -> &str {
        &self.source.text[node.span.start..node.span.end]
    }

    pub fn has_errors(&self) -> bool {
        self.root.has_error()
    }

    /// Top-level children that are not comments.
    pub fn declarations(&self) -> impl Iterator<Item = &AstNode> {
        self.root
            .children
            .iter()
            .filter(|n| !matches!(n.kind.as_str(), "line_comment" | "block_comment"))
    }
}

/// Grammars available to the parser, keyed by language.
pub struct GrammarSet {
    grammars: BTreeMap<Language, tree_sitter::Language>,
}

impl Default for GrammarSet {
    fn default() -> Self {
        let mut grammars = BTreeMap::new();
        grammars.insert(Language::Java, tree_sitter_java::LANGUAGE.into());
        Self { grammars }
    }
}

impl GrammarSet {
    pub fn empty() -> Self {
        Self {
            grammars: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, language: Language, grammar: tree_sitter::Language) {
        self.grammars.insert(language, grammar);
    }

    pub fn supports(&self, language: Language) -> bool {
        self.grammars.contains_key(&language)
    }

    pub fn parse(&self, file: &SourceFile) -> Result<Ast> {
        let grammar = self.grammars.get(&file.language).ok_or_else(|| {
            Error::Config(format!("no grammar available for {} sources ({})", file.language, file.path))
        })?;
        let mut parser = Parser::new();
        parser
            .set_language(grammar)
            .map_err(|e| Error::Config(format!("incompatible {} grammar: {e}", file.language)))?;
        let tree = parser
            .parse(&file.text, None)
            .ok_or_else(|| Error::Integrity(format!("parser produced no tree for {}", file.path)))?;
        Ok(Ast {
            root: convert(tree.root_node(), None),
            source: file.clone(),
        })
    }
}

/// Parses with the built-in grammar set.
pub fn parse_source(file: &SourceFile) -> Result<Ast> {
    GrammarSet::default().parse(file)
}

fn convert(node: Node<'_>, field: Option<&str>) -> AstNode {
    let mut children = Vec::new();
    let mut cursor = node.walk();
    if cursor.goto_first_child() {
        loop {
            let child = cursor.node();
            if child.is_named() || child.is_missing() {
                children.push(convert(child, cursor.field_name()));
            }
            if !cursor.goto_next_sibling() {
                break;
            }
        }
    }
    let kind = if node.is_missing() {
        MISSING_KIND.to_string()
    } else {
        node.kind().to_string()
    };
    AstNode {
        kind,
        field: field.map(str::to_string),
        span: Span::new(node.start_byte(), node.end_byte()),
        error: node.is_error() || node.is_missing(),
        children,
    }
}
