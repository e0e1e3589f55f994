use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ast::{Ast, AstNode, GrammarSet};
use super::{Language, SourceFile, Span};
use crate::error::{Error, Result};

/// Component name used for classes declared without a package.
pub const DEFAULT_COMPONENT: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Class,
    Interface,
    Enum,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub declared_type: String,
    /// Every type name mentioned by the declared type, generics included.
    pub type_names: Vec<String>,
}

/// How the target of a call expression was written.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "type", rename_all = "snake_case")]
pub enum Receiver {
    /// Unqualified `m()`.
    Implicit,
    This,
    Super,
    /// Receiver whose (static or declared) type name is known.
    Type(String),
    /// Receiver expression whose type cannot be determined by name.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallSite {
    /// Invoked method name, or `<init>` for `new T(..)`.
    pub name: String,
    pub receiver: Receiver,
    pub span: Span,
}

pub const CONSTRUCTOR_CALL: &str = "<init>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDescriptor {
    pub name: String,
    /// Qualified name of the declaring class.
    pub owner: String,
    /// Unique id within a snapshot: `Owner#name`, with `~k` appended for the
    /// k-th later overload.
    pub id: String,
    pub span: Span,
    pub ast_slice: AstNode,
    /// Distinct invoked method names in first-occurrence order.
    pub calls: Vec<String>,
    pub call_sites: Vec<CallSite>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDescriptor {
    pub qualified_name: String,
    pub simple_name: String,
    pub kind: ClassKind,
    pub file: String,
    pub span: Span,
    pub modifiers: String,
    pub superclass: Option<String>,
    pub interfaces: Vec<String>,
    pub fields: Vec<Field>,
    pub constructors: Vec<MethodDescriptor>,
    pub methods: Vec<MethodDescriptor>,
    /// Package path; [`DEFAULT_COMPONENT`] when the file has none.
    pub component: String,
    /// Import declarations of the enclosing file, as written.
    pub imports: Vec<String>,
    /// Enclosing class for nested types.
    pub outer: Option<String>,
    /// Calls made outside methods and constructors (field initialisers,
    /// initializer blocks).
    pub member_call_sites: Vec<CallSite>,
    /// Set when recovery nodes occur inside the declaration.
    pub degraded: bool,
}

impl ClassDescriptor {
    pub fn all_call_sites(&self) -> impl Iterator<Item = &CallSite> {
        self.methods
            .iter()
            .chain(&self.constructors)
            .flat_map(|m| m.call_sites.iter())
            .chain(&self.member_call_sites)
    }

    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// Extracts one descriptor per class, interface and enum (nested ones
/// included) from a Java AST.
pub fn extract_classes(ast: &Ast) -> Result<Vec<ClassDescriptor>> {
    if ast.source.language != Language::Java {
        return Err(Error::Argument(format!(
            "class extraction expects a java AST, got {} ({})",
            ast.source.language, ast.source.path
        )));
    }
    let package = find_package(ast);
    let imports = ast
        .root
        .children_of_kind("import_declaration")
        .map(|n| import_text(ast, n))
        .collect();
    let mut ex = Extractor {
        ast,
        component: package.clone().unwrap_or_else(|| DEFAULT_COMPONENT.to_string()),
        package,
        imports,
        out: Vec::new(),
    };
    ex.visit_container(&ast.root, None, false);
    Ok(ex.out)
}

/// Returns the exact source text at the method's span.
pub fn method_body<'a>(file: &'a SourceFile, method: &MethodDescriptor) -> Result<&'a str> {
    let Span { start, end } = method.span;
    if start > end || end > file.text.len() {
        return Err(Error::Integrity(format!(
            "span {start}..{end} of {} lies outside {} ({} bytes); snapshot drift?",
            method.id,
            file.path,
            file.text.len()
        )));
    }
    file.text.get(start..end).ok_or_else(|| {
        Error::Integrity(format!(
            "span {start}..{end} of {} does not fall on character boundaries in {}",
            method.id, file.path
        ))
    })
}

/// Re-parses a method's text inside a synthetic class and returns the method
/// node, for round-trip comparison against [`MethodDescriptor::ast_slice`].
pub fn reparse_method(text: &str) -> Result<AstNode> {
    const PREFIX: &str = "class __Reparse__ {\n";
    let wrapped = format!("{PREFIX}{text}\n}}\n");
    let ast = GrammarSet::default().parse(&SourceFile::java("__reparse__.java", wrapped))?;
    ast.root
        .walk()
        .into_iter()
        .find(|n| matches!(n.kind.as_str(), "method_declaration" | "constructor_declaration") && n.span.start == PREFIX.len())
        .cloned()
        .ok_or_else(|| Error::Integrity("re-parsed text is not a single method declaration".into()))
}

const CLASS_KINDS: [&str; 4] = [
    "class_declaration",
    "interface_declaration",
    "enum_declaration",
    "record_declaration",
];

struct Extractor<'a> {
    ast: &'a Ast,
    package: Option<String>,
    component: String,
    imports: Vec<String>,
    out: Vec<ClassDescriptor>,
}

impl<'a> Extractor<'a> {
    fn text(&self, node: &AstNode) -> &'a str {
        let ast: &'a Ast = self.ast;
        ast.text(node)
    }

    /// Walks nodes that may directly contain type declarations: the program,
    /// class bodies and recovery nodes wrapping them.
    fn visit_container(&mut self, node: &AstNode, outer: Option<&str>, degraded: bool) {
        for child in &node.children {
            if CLASS_KINDS.contains(&child.kind.as_str()) {
                self.visit_class(child, outer, degraded);
            } else if child.kind == "ERROR" || child.kind == "enum_body_declarations" {
                self.visit_container(child, outer, degraded || child.error);
            }
        }
    }

    fn visit_class(&mut self, node: &AstNode, outer: Option<&str>, degraded: bool) {
        let Some(name_node) = node.child_by_field("name") else {
            return;
        };
        let simple_name = self.text(name_node).to_string();
        let qualified_name = match (outer, &self.package) {
            (Some(o), _) => format!("{o}.{simple_name}"),
            (None, Some(p)) => format!("{p}.{simple_name}"),
            (None, None) => simple_name.clone(),
        };
        let kind = match node.kind.as_str() {
            "interface_declaration" => ClassKind::Interface,
            "enum_declaration" => ClassKind::Enum,
            _ => ClassKind::Class,
        };
        let modifiers = node
            .children_of_kind("modifiers")
            .next()
            .map(|m| self.text(m).split_whitespace().collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        let superclass = node
            .child_by_field("superclass")
            .and_then(|s| s.children.first())
            .and_then(|t| self.base_type_name(t));
        let interface_list = node
            .child_by_field("interfaces")
            .or_else(|| node.children_of_kind("extends_interfaces").next());
        let interfaces = interface_list
            .and_then(|n| n.children_of_kind("type_list").next())
            .map(|list| list.children.iter().filter_map(|t| self.base_type_name(t)).collect())
            .unwrap_or_default();

        let body = node.child_by_field("body");
        let mut members: Vec<&AstNode> = Vec::new();
        if let Some(body) = body {
            for child in &body.children {
                if child.kind == "enum_body_declarations" {
                    members.extend(child.children.iter());
                } else {
                    members.push(child);
                }
            }
        }

        let mut fields = Vec::new();
        for member in members.iter().filter(|m| m.kind == "field_declaration" || m.kind == "constant_declaration") {
            let Some(ty) = member.child_by_field("type") else { continue };
            let declared_type = self.text(ty).to_string();
            let type_names = self.type_names(ty);
            for decl in member.children.iter().filter(|c| c.field.as_deref() == Some("declarator")) {
                if let Some(n) = decl.child_by_field("name") {
                    fields.push(Field {
                        name: self.text(n).to_string(),
                        declared_type: declared_type.clone(),
                        type_names: type_names.clone(),
                    });
                }
            }
        }

        let degraded = degraded || body.is_some_and(|b| self.has_error_outside_nested(b));
        let mut class = ClassDescriptor {
            qualified_name: qualified_name.clone(),
            simple_name,
            kind,
            file: self.ast.source.path.clone(),
            span: node.span,
            modifiers,
            superclass,
            interfaces,
            fields,
            constructors: Vec::new(),
            methods: Vec::new(),
            component: self.component.clone(),
            imports: self.imports.clone(),
            outer: outer.map(str::to_string),
            member_call_sites: Vec::new(),
            degraded,
        };

        let field_types: HashMap<String, String> = self.visible_field_types(&class);
        let mut overloads: BTreeMap<String, usize> = BTreeMap::new();
        for member in &members {
            match member.kind.as_str() {
                "method_declaration" | "constructor_declaration" => {
                    let Some(n) = member.child_by_field("name") else { continue };
                    let name = self.text(n).to_string();
                    let seen = overloads.entry(name.clone()).or_insert(0);
                    let id = if member.kind == "constructor_declaration" {
                        format!("{qualified_name}#<init>{}", suffix(*seen))
                    } else {
                        format!("{qualified_name}#{name}{}", suffix(*seen))
                    };
                    *seen += 1;
                    let call_sites = self.call_sites(member, &field_types);
                    let mut calls: Vec<String> = Vec::new();
                    for site in &call_sites {
                        if site.name != CONSTRUCTOR_CALL && !calls.contains(&site.name) {
                            calls.push(site.name.clone());
                        }
                    }
                    let method = MethodDescriptor {
                        name,
                        owner: qualified_name.clone(),
                        id,
                        span: member.span,
                        ast_slice: (*member).clone(),
                        calls,
                        call_sites,
                    };
                    if member.kind == "constructor_declaration" {
                        class.constructors.push(method);
                    } else {
                        class.methods.push(method);
                    }
                }
                "field_declaration" | "static_initializer" | "block" | "constant_declaration" => {
                    let sites = self.call_sites(member, &field_types);
                    class.member_call_sites.extend(sites);
                }
                _ => {}
            }
        }

        self.out.push(class);
        if let Some(body) = body {
            self.visit_container(body, Some(&qualified_name), degraded);
        }
    }

    fn has_error_outside_nested(&self, node: &AstNode) -> bool {
        node.children.iter().any(|c| {
            if CLASS_KINDS.contains(&c.kind.as_str()) {
                false
            } else {
                c.error || self.has_error_outside_nested(c)
            }
        })
    }

    /// Fields of this class and its enclosing classes, innermost first.
    fn visible_field_types(&self, class: &ClassDescriptor) -> HashMap<String, String> {
        let mut map = HashMap::new();
        let mut chain = vec![class];
        let mut outer = class.outer.clone();
        while let Some(o) = outer {
            match self.out.iter().find(|c| c.qualified_name == o) {
                Some(c) => {
                    chain.push(c);
                    outer = c.outer.clone();
                }
                None => break,
            }
        }
        for c in chain.into_iter().rev() {
            for f in &c.fields {
                if let Some(t) = f.type_names.first() {
                    map.insert(f.name.clone(), t.clone());
                }
            }
        }
        map
    }

    fn call_sites(&self, member: &AstNode, field_types: &HashMap<String, String>) -> Vec<CallSite> {
        let mut locals: HashMap<String, String> = HashMap::new();
        for node in member.walk() {
            let typed = match node.kind.as_str() {
                "formal_parameter" | "catch_formal_parameter" | "enhanced_for_statement" => {
                    node.child_by_field("type").zip(node.child_by_field("name")).map(|(t, n)| (t, vec![n]))
                }
                "local_variable_declaration" => node.child_by_field("type").map(|t| {
                    let names = node
                        .children
                        .iter()
                        .filter(|c| c.field.as_deref() == Some("declarator"))
                        .filter_map(|d| d.child_by_field("name"))
                        .collect();
                    (t, names)
                }),
                _ => None,
            };
            if let Some((ty, names)) = typed {
                if let Some(base) = self.base_type_name(ty) {
                    for n in names {
                        locals.insert(self.text(n).to_string(), base.clone());
                    }
                }
            }
        }

        let mut sites = Vec::new();
        self.collect_calls(member, &locals, field_types, &mut sites);
        sites
    }

    fn collect_calls(
        &self,
        node: &AstNode,
        locals: &HashMap<String, String>,
        fields: &HashMap<String, String>,
        out: &mut Vec<CallSite>,
    ) {
        match node.kind.as_str() {
            "method_invocation" => {
                if let Some(name) = node.child_by_field("name") {
                    let receiver = match node.child_by_field("object") {
                        None => Receiver::Implicit,
                        Some(obj) => self.receiver(obj, locals, fields),
                    };
                    out.push(CallSite {
                        name: self.text(name).to_string(),
                        receiver,
                        span: node.span,
                    });
                }
            }
            "object_creation_expression" => {
                if let Some(t) = node.child_by_field("type").and_then(|t| self.base_type_name(t)) {
                    out.push(CallSite {
                        name: CONSTRUCTOR_CALL.to_string(),
                        receiver: Receiver::Type(t),
                        span: node.span,
                    });
                }
            }
            _ => {}
        }
        for child in &node.children {
            if CLASS_KINDS.contains(&child.kind.as_str()) {
                continue;
            }
            self.collect_calls(child, locals, fields, out);
        }
    }

    fn receiver(
        &self,
        obj: &AstNode,
        locals: &HashMap<String, String>,
        fields: &HashMap<String, String>,
    ) -> Receiver {
        match obj.kind.as_str() {
            "this" => Receiver::This,
            "super" => Receiver::Super,
            "identifier" => {
                let name = self.text(obj);
                if let Some(t) = locals.get(name).or_else(|| fields.get(name)) {
                    Receiver::Type(t.clone())
                } else if name.starts_with(|c: char| c.is_ascii_uppercase()) {
                    Receiver::Type(name.to_string())
                } else {
                    Receiver::Unknown
                }
            }
            "field_access" => {
                let is_this = obj.child_by_field("object").is_some_and(|o| o.kind == "this");
                match obj.child_by_field("field") {
                    Some(f) if is_this => fields
                        .get(self.text(f))
                        .map_or(Receiver::Unknown, |t| Receiver::Type(t.clone())),
                    _ => Receiver::Unknown,
                }
            }
            "object_creation_expression" => obj
                .child_by_field("type")
                .and_then(|t| self.base_type_name(t))
                .map_or(Receiver::Unknown, Receiver::Type),
            "parenthesized_expression" => obj
                .children
                .first()
                .map_or(Receiver::Unknown, |inner| self.receiver(inner, locals, fields)),
            _ => Receiver::Unknown,
        }
    }

    /// Name of a (possibly generic or array) reference type; `None` for
    /// primitives.
    fn base_type_name(&self, ty: &AstNode) -> Option<String> {
        match ty.kind.as_str() {
            "type_identifier" | "scoped_type_identifier" => Some(self.text(ty).to_string()),
            "generic_type" => ty.children.first().and_then(|t| self.base_type_name(t)),
            "array_type" => ty.child_by_field("element").and_then(|t| self.base_type_name(t)),
            _ => None,
        }
    }

    fn type_names(&self, ty: &AstNode) -> Vec<String> {
        let mut names = Vec::new();
        self.collect_type_names(ty, &mut names);
        names
    }

    fn collect_type_names(&self, node: &AstNode, names: &mut Vec<String>) {
        match node.kind.as_str() {
            "type_identifier" | "scoped_type_identifier" => {
                let name = self.text(node).to_string();
                if !names.contains(&name) {
                    names.push(name);
                }
            }
            _ => {
                for child in &node.children {
                    self.collect_type_names(child, names);
                }
            }
        }
    }
}

fn suffix(seen: usize) -> String {
    if seen == 0 {
        String::new()
    } else {
        format!("~{seen}")
    }
}

fn find_package(ast: &Ast) -> Option<String> {
    let decl = ast.root.children_of_kind("package_declaration").next()?;
    decl.children
        .iter()
        .find(|c| matches!(c.kind.as_str(), "scoped_identifier" | "identifier"))
        .map(|n| ast.text(n).chars().filter(|c| !c.is_whitespace()).collect())
}

fn import_text(ast: &Ast, node: &AstNode) -> String {
    let text = ast.text(node);
    let inner = text.trim().trim_start_matches("import").trim_end_matches(';');
    inner.chars().filter(|c| !c.is_whitespace()).collect::<String>().replace("static", "static ")
}
