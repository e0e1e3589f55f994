use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::extract::{CallSite, ClassDescriptor, Receiver, CONSTRUCTOR_CALL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Call,
    Inheritance,
    Import,
    FieldType,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Call => "call",
            EdgeKind::Inheritance => "inheritance",
            EdgeKind::Import => "import",
            EdgeKind::FieldType => "field-type",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Method,
    Class,
    Component,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>, kind: EdgeKind) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            kind,
        }
    }
}

/// A reference that does not resolve to project code (JDK, Android SDK,
/// third-party libraries).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExternalRef {
    pub from: String,
    pub name: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub granularity: Granularity,
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<Edge>,
    pub external: BTreeSet<ExternalRef>,
    /// Containing item one granularity up (method -> class, class -> component).
    pub owners: BTreeMap<String, String>,
    /// Resolved reference occurrences per source node, before deduplication.
    pub references: BTreeMap<String, usize>,
}

impl DependencyGraph {
    pub fn new(granularity: Granularity) -> Self {
        Self {
            granularity,
            nodes: BTreeSet::new(),
            edges: BTreeSet::new(),
            external: BTreeSet::new(),
            owners: BTreeMap::new(),
            references: BTreeMap::new(),
        }
    }

    /// Builds a bare graph from node names and `(from, to, kind)` triples.
    pub fn from_edges<'a>(
        granularity: Granularity,
        nodes: impl IntoIterator<Item = &'a str>,
        edges: impl IntoIterator<Item = (&'a str, &'a str, EdgeKind)>,
    ) -> Self {
        let mut g = Self::new(granularity);
        g.nodes.extend(nodes.into_iter().map(str::to_string));
        for (from, to, kind) in edges {
            g.add_edge(from, to, kind);
        }
        g
    }

    /// Adds an edge between existing nodes. Self-loops are dropped.
    pub fn add_edge(&mut self, from: &str, to: &str, kind: EdgeKind) {
        debug_assert!(self.nodes.contains(from) && self.nodes.contains(to), "{from} -> {to}");
        *self.references.entry(from.to_string()).or_default() += 1;
        if from != to {
            self.edges.insert(Edge::new(from, to, kind));
        }
    }

    /// Distinct targets `node` depends on.
    pub fn targets(&self, node: &str) -> BTreeSet<&str> {
        self.edges
            .iter()
            .filter(|e| e.from == node)
            .map(|e| e.to.as_str())
            .collect()
    }

    pub fn distinct_out_degree(&self, node: &str) -> usize {
        self.targets(node).len()
    }

    pub fn reference_count(&self, node: &str) -> usize {
        self.references.get(node).copied().unwrap_or(0)
    }

    /// Subgraph induced by `keep`, with owners and external refs filtered to
    /// match.
    pub fn induced(&self, keep: &BTreeSet<String>) -> DependencyGraph {
        let mut g = DependencyGraph::new(self.granularity);
        g.nodes = self.nodes.intersection(keep).cloned().collect();
        g.edges = self
            .edges
            .iter()
            .filter(|e| g.nodes.contains(&e.from) && g.nodes.contains(&e.to))
            .cloned()
            .collect();
        g.external = self.external.iter().filter(|r| g.nodes.contains(&r.from)).cloned().collect();
        g.owners = self
            .owners
            .iter()
            .filter(|(k, _)| g.nodes.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        g
    }
}

/// Builds the dependency graph of one snapshot at the requested granularity.
pub fn build_dependency_graph(classes: &[ClassDescriptor], granularity: Granularity) -> Result<DependencyGraph> {
    let resolver = Resolver::new(classes)?;
    Ok(match granularity {
        Granularity::Method => resolver.method_graph(),
        Granularity::Class => resolver.class_graph(),
        Granularity::Component => quotient(&resolver.class_graph()),
    })
}

/// Component graph as the image of the class graph under package projection.
fn quotient(class_graph: &DependencyGraph) -> DependencyGraph {
    let mut g = DependencyGraph::new(Granularity::Component);
    let component = |c: &str| class_graph.owners.get(c).cloned().unwrap_or_default();
    g.nodes = class_graph.nodes.iter().map(|c| component(c)).collect();
    for e in &class_graph.edges {
        let (from, to) = (component(&e.from), component(&e.to));
        g.add_edge(&from, &to, e.kind);
    }
    for r in &class_graph.external {
        g.external.insert(ExternalRef {
            from: component(&r.from),
            name: r.name.clone(),
            kind: r.kind,
        });
    }
    g
}

struct Resolver<'a> {
    classes: BTreeMap<&'a str, &'a ClassDescriptor>,
    /// class -> method name -> method ids (constructors excluded).
    methods: HashMap<&'a str, BTreeMap<&'a str, Vec<&'a str>>>,
}

impl<'a> Resolver<'a> {
    fn new(list: &'a [ClassDescriptor]) -> Result<Self> {
        let mut classes: BTreeMap<&str, &ClassDescriptor> = BTreeMap::new();
        for c in list {
            if let Some(prev) = classes.insert(&c.qualified_name, c) {
                return Err(Error::Structural(format!(
                    "duplicate qualified name {} declared in {} and {}",
                    c.qualified_name, prev.file, c.file
                )));
            }
        }
        let mut methods: HashMap<&str, BTreeMap<&str, Vec<&str>>> = HashMap::new();
        for c in list {
            let by_name = methods.entry(c.qualified_name.as_str()).or_default();
            for m in &c.methods {
                by_name.entry(m.name.as_str()).or_default().push(m.id.as_str());
            }
        }
        Ok(Self { classes, methods })
    }

    /// Resolves a type name as written inside `ctx` to a project class.
    fn resolve_type(&self, ctx: &ClassDescriptor, name: &str) -> Option<&'a str> {
        let name = name.trim();
        let lookup = |q: &str| self.classes.get_key_value(q).map(|(k, _)| *k);
        if name.contains('.') {
            if let Some(q) = lookup(name) {
                return Some(q);
            }
        }
        // enclosing scopes, innermost first
        let mut scope = Some(ctx.qualified_name.clone());
        while let Some(s) = scope {
            if let Some(q) = lookup(&format!("{s}.{name}")) {
                return Some(q);
            }
            scope = self.classes.get(s.as_str()).and_then(|c| c.outer.clone());
        }
        let first = name.split('.').next().unwrap_or(name);
        let rest = &name[first.len()..];
        for import in &ctx.imports {
            if import.starts_with("static ") {
                continue;
            }
            if import.rsplit('.').next() == Some(first) {
                if let Some(q) = lookup(&format!("{import}{rest}")) {
                    return Some(q);
                }
            }
        }
        let package = if ctx.component == super::extract::DEFAULT_COMPONENT && !ctx.qualified_name.contains('.') {
            None
        } else {
            Some(ctx.component.as_str())
        };
        let same_package = match package {
            Some(p) => format!("{p}.{name}"),
            None => name.to_string(),
        };
        if let Some(q) = lookup(&same_package) {
            return Some(q);
        }
        for import in &ctx.imports {
            if let Some(pkg) = import.strip_suffix(".*") {
                if let Some(q) = lookup(&format!("{pkg}.{name}")) {
                    return Some(q);
                }
            }
        }
        None
    }

    fn parents(&self, class: &ClassDescriptor) -> Vec<&'a str> {
        class
            .superclass
            .iter()
            .chain(&class.interfaces)
            .filter_map(|t| self.resolve_type(class, t))
            .collect()
    }

    /// The class followed by its project ancestors, breadth-first.
    fn hierarchy(&self, start: &'a str) -> Vec<&'a str> {
        let mut seen = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(q) = queue.pop_front() {
            if let Some(c) = self.classes.get(q) {
                for p in self.parents(c) {
                    if !seen.contains(&p) {
                        seen.push(p);
                        queue.push_back(p);
                    }
                }
            }
        }
        seen
    }

    fn methods_in_hierarchy(&self, start: &'a str, name: &str) -> Vec<&'a str> {
        self.hierarchy(start)
            .into_iter()
            .filter_map(|c| self.methods.get(c).and_then(|m| m.get(name)))
            .flatten()
            .copied()
            .collect()
    }

    fn resolve_call(&self, class: &'a ClassDescriptor, site: &CallSite) -> Resolution<'a> {
        let own = class.qualified_name.as_str();
        match &site.receiver {
            Receiver::Implicit | Receiver::This => {
                let mut scope = Some(own);
                while let Some(s) = scope {
                    let found = self.methods_in_hierarchy(s, &site.name);
                    if !found.is_empty() {
                        return Resolution::Methods(found);
                    }
                    if site.receiver == Receiver::This {
                        break;
                    }
                    scope = self.classes.get(s).and_then(|c| c.outer.as_deref());
                }
                Resolution::External(site.name.clone())
            }
            Receiver::Super => {
                let found: Vec<&str> = self
                    .parents(class)
                    .into_iter()
                    .flat_map(|p| self.methods_in_hierarchy(p, &site.name))
                    .collect();
                if found.is_empty() {
                    Resolution::External(format!("super.{}", site.name))
                } else {
                    Resolution::Methods(found)
                }
            }
            Receiver::Type(t) => match self.resolve_type(class, t) {
                Some(target) if site.name == CONSTRUCTOR_CALL => Resolution::Class(target),
                Some(target) => {
                    let found = self.methods_in_hierarchy(target, &site.name);
                    if found.is_empty() {
                        Resolution::External(format!("{t}.{}", site.name))
                    } else {
                        Resolution::Methods(found)
                    }
                }
                None if site.name == CONSTRUCTOR_CALL => Resolution::External(format!("new {t}")),
                None => Resolution::External(format!("{t}.{}", site.name)),
            },
            Receiver::Unknown => Resolution::External(format!("?.{}", site.name)),
        }
    }

    fn owner_of<'m>(&self, method_id: &'m str) -> &'m str {
        method_id.split_once('#').map_or(method_id, |(c, _)| c)
    }

    fn method_graph(&self) -> DependencyGraph {
        let mut g = DependencyGraph::new(Granularity::Method);
        for c in self.classes.values() {
            for m in &c.methods {
                g.nodes.insert(m.id.clone());
                g.owners.insert(m.id.clone(), c.qualified_name.clone());
            }
        }
        for c in self.classes.values() {
            for m in &c.methods {
                for site in &m.call_sites {
                    match self.resolve_call(c, site) {
                        Resolution::Methods(targets) => {
                            for t in targets {
                                g.add_edge(&m.id, t, EdgeKind::Call);
                            }
                        }
                        Resolution::Class(_) => {}
                        Resolution::External(name) => {
                            g.external.insert(ExternalRef {
                                from: m.id.clone(),
                                name,
                                kind: EdgeKind::Call,
                            });
                        }
                    }
                }
            }
        }
        g
    }

    fn class_graph(&self) -> DependencyGraph {
        let mut g = DependencyGraph::new(Granularity::Class);
        for c in self.classes.values() {
            g.nodes.insert(c.qualified_name.clone());
            g.owners.insert(c.qualified_name.clone(), c.component.clone());
        }
        for c in self.classes.values() {
            let from = c.qualified_name.as_str();
            let external = |name: String, kind| ExternalRef {
                from: from.to_string(),
                name,
                kind,
            };
            let mut ext = Vec::new();
            for parent in c.superclass.iter().chain(&c.interfaces) {
                match self.resolve_type(c, parent) {
                    Some(t) => g.add_edge(from, t, EdgeKind::Inheritance),
                    None => ext.push(external(parent.clone(), EdgeKind::Inheritance)),
                }
            }
            if c.outer.is_none() {
                for import in &c.imports {
                    if import.ends_with(".*") || import.starts_with("static ") {
                        continue;
                    }
                    match self.classes.get_key_value(import.as_str()) {
                        Some((t, _)) => g.add_edge(from, t, EdgeKind::Import),
                        None => ext.push(external(import.clone(), EdgeKind::Import)),
                    }
                }
            }
            for field in &c.fields {
                for t in &field.type_names {
                    match self.resolve_type(c, t) {
                        Some(target) => g.add_edge(from, target, EdgeKind::FieldType),
                        None => ext.push(external(t.clone(), EdgeKind::FieldType)),
                    }
                }
            }
            for site in c.all_call_sites() {
                match self.resolve_call(c, site) {
                    Resolution::Methods(targets) => {
                        for t in targets {
                            g.add_edge(from, self.owner_of(t), EdgeKind::Call);
                        }
                    }
                    Resolution::Class(t) => g.add_edge(from, t, EdgeKind::Call),
                    Resolution::External(name) => ext.push(external(name, EdgeKind::Call)),
                }
            }
            g.external.extend(ext);
        }
        g
    }
}

enum Resolution<'a> {
    Methods(Vec<&'a str>),
    Class(&'a str),
    External(String),
}

#[cfg(test)]
mod tests {
    use super::super::{extract_classes, parse_source, SourceFile};
    use super::*;

    fn snapshot(files: &[(&str, &str)]) -> Vec<ClassDescriptor> {
        files
            .iter()
            .flat_map(|(p, t)| extract_classes(&parse_source(&SourceFile::java(*p, *t)).unwrap()).unwrap())
            .collect()
    }

    fn edge_set(g: &DependencyGraph) -> Vec<(String, String, EdgeKind)> {
        g.edges.iter().map(|e| (e.from.clone(), e.to.clone(), e.kind)).collect()
    }

    #[test]
    fn intra_class_call_becomes_method_edge() {
        let cs = snapshot(&[("Foo.java", "class Foo { void a(){} void b(){ a(); } }")]);
        let g = build_dependency_graph(&cs, Granularity::Method).unwrap();
        assert_eq!(edge_set(&g), [("Foo#b".to_string(), "Foo#a".to_string(), EdgeKind::Call)]);
        assert_eq!(g.owners["Foo#a"], "Foo");
    }

    #[test]
    fn extends_becomes_inheritance_edge() {
        let cs = snapshot(&[("A.java", "class A {}"), ("B.java", "class B extends A {}")]);
        let g = build_dependency_graph(&cs, Granularity::Class).unwrap();
        assert_eq!(edge_set(&g), [("B".to_string(), "A".to_string(), EdgeKind::Inheritance)]);
    }

    #[test]
    fn unrelated_classes_have_no_edges() {
        let cs = snapshot(&[("A.java", "class A { void f(){} }"), ("B.java", "class B { void g(){} }")]);
        for gran in [Granularity::Method, Granularity::Class, Granularity::Component] {
            assert!(build_dependency_graph(&cs, gran).unwrap().edges.is_empty());
        }
    }

    #[test]
    fn duplicate_names_report_both_files() {
        let cs = snapshot(&[("x/A.java", "class A {}"), ("y/A.java", "class A {}")]);
        let err = build_dependency_graph(&cs, Granularity::Class).unwrap_err().to_string();
        assert!(err.contains("x/A.java") && err.contains("y/A.java"), "{err}");
    }

    #[test]
    fn all_four_edge_kinds_and_external_side_table() {
        let cs = snapshot(&[
            ("data/Repo.java", "package app.data;\npublic class Repo { public void load(){} }"),
            ("data/Item.java", "package app.data;\npublic class Item {}"),
            ("ui/Base.java", "package app.ui;\nimport android.app.Activity;\npublic class Base extends Activity { void start(){} }"),
            (
                "ui/Screen.java",
                "package app.ui;\nimport app.data.Repo;\nimport app.data.*;\nimport android.os.Bundle;\n\
                 public class Screen extends Base {\n  private Repo repo; java.util.List<Item> items;\n\
                 void show(Bundle b) { repo.load(); start(); setContentView(1); }\n}",
            ),
        ]);
        let g = build_dependency_graph(&cs, Granularity::Class).unwrap();
        let edges = edge_set(&g);
        let s = |x: &str| x.to_string();
        assert!(edges.contains(&(s("app.ui.Screen"), s("app.ui.Base"), EdgeKind::Inheritance)));
        assert!(edges.contains(&(s("app.ui.Screen"), s("app.ui.Base"), EdgeKind::Call)));
        assert!(edges.contains(&(s("app.ui.Screen"), s("app.data.Repo"), EdgeKind::Import)));
        assert!(edges.contains(&(s("app.ui.Screen"), s("app.data.Repo"), EdgeKind::FieldType)));
        assert!(edges.contains(&(s("app.ui.Screen"), s("app.data.Repo"), EdgeKind::Call)));
        assert!(edges.contains(&(s("app.ui.Screen"), s("app.data.Item"), EdgeKind::FieldType)));
        // SDK types never become nodes
        assert!(!g.nodes.iter().any(|n| n.starts_with("android")));
        let ext: Vec<_> = g.external.iter().map(|r| r.name.as_str()).collect();
        assert!(ext.contains(&"Activity"));
        assert!(ext.contains(&"android.os.Bundle"));
        assert!(ext.contains(&"setContentView"));

        let comp = build_dependency_graph(&cs, Granularity::Component).unwrap();
        assert_eq!(comp.nodes.iter().map(String::as_str).collect::<Vec<_>>(), ["app.data", "app.ui"]);
        assert!(comp.edges.iter().all(|e| e.from == "app.ui" && e.to == "app.data"));
    }

    #[test]
    fn overloads_resolve_to_all_candidates_in_hierarchy() {
        let cs = snapshot(&[
            ("P.java", "class P { void f(int x){} }"),
            ("C.java", "class C extends P { void f(String s){} void g(){ f(null); } }"),
        ]);
        let g = build_dependency_graph(&cs, Granularity::Method).unwrap();
        let targets: Vec<_> = g.targets("C#g").into_iter().collect();
        assert_eq!(targets, ["C#f", "P#f"]);
    }

    #[test]
    fn inner_class_calls_outer_method() {
        let cs = snapshot(&[("O.java", "class O { void helper(){} class I { void run(){ helper(); } } }")]);
        let g = build_dependency_graph(&cs, Granularity::Method).unwrap();
        assert!(g.edges.contains(&Edge::new("O.I#run", "O#helper", EdgeKind::Call)));
    }

    #[test]
    fn distinct_and_total_reference_counts() {
        let cs = snapshot(&[
            ("B.java", "class B { void x(){} }"),
            ("A.java", "class A { B b; void m(){ b.x(); b.x(); } }"),
        ]);
        let g = build_dependency_graph(&cs, Granularity::Class).unwrap();
        assert_eq!(g.distinct_out_degree("A"), 1);
        assert_eq!(g.reference_count("A"), 3);
    }

    #[test]
    fn call_edges_have_a_textual_occurrence_in_the_caller() {
        let text = "class K { int n; void a(){ b(); c(); } void b(){ c(); } void c(){ } void d(){ a(); } }";
        let cs = snapshot(&[("K.java", text)]);
        let g = build_dependency_graph(&cs, Granularity::Method).unwrap();
        for e in &g.edges {
            let caller = cs[0].methods.iter().find(|m| m.id == e.from).unwrap();
            let callee = e.to.split('#').nth(1).unwrap();
            let body = &text[caller.span.start..caller.span.end];
            assert!(body.contains(&format!("{callee}(")), "{e:?}");
        }
        assert_eq!(g.edges.len(), 4);
    }

    #[test]
    fn component_graph_is_quotient_of_class_graph() {
        let cs = snapshot(&[
            ("a/X.java", "package a;\nimport b.Y;\nclass X extends Z { Y y; }"),
            ("a/Z.java", "package a;\nclass Z {}"),
            ("b/Y.java", "package b;\nimport a.Z;\npublic class Y { void f(){ new Z(); } }"),
        ]);
        let class = build_dependency_graph(&cs, Granularity::Class).unwrap();
        let comp = build_dependency_graph(&cs, Granularity::Component).unwrap();
        let mut image: BTreeSet<(String, String, EdgeKind)> = BTreeSet::new();
        for e in &class.edges {
            let (f, t) = (&class.owners[&e.from], &class.owners[&e.to]);
            if f != t {
                image.insert((f.clone(), t.clone(), e.kind));
            }
        }
        let comp_edges: BTreeSet<_> = comp.edges.iter().map(|e| (e.from.clone(), e.to.clone(), e.kind)).collect();
        assert_eq!(comp_edges, image);
        assert!(!image.is_empty());
    }
}
