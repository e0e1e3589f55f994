use std::collections::{BTreeMap, BTreeSet};

use super::issue::{IssueRecord, IssueSource, Severity};
use super::references::SwiftUnit;
use super::swift::{lex, type_declarations, type_references};
use crate::error::{Error, Result};
use crate::source::{DependencyGraph, EdgeKind, Granularity};

/// Type-level graph of the translated set, with declaration sites.
#[derive(Debug, Clone)]
pub struct TranslatedGraph {
    pub graph: DependencyGraph,
    /// Type name to `(file, line, column)` of its first declaration.
    pub declarations: BTreeMap<String, (String, usize, usize)>,
}

pub fn translated_graph(units: &[SwiftUnit]) -> TranslatedGraph {
    let lexed: Vec<_> = units.iter().filter_map(|u| lex(&u.code).ok().map(|t| (u, t))).collect();
    let mut declarations = BTreeMap::new();
    for (unit, tokens) in &lexed {
        for d in type_declarations(tokens) {
            declarations
                .entry(d.name.clone())
                .or_insert_with(|| (unit.file.clone(), d.line, d.column));
        }
    }
    let known: BTreeSet<String> = declarations.keys().cloned().collect();
    let mut graph = DependencyGraph::new(Granularity::Class);
    graph.nodes = known.clone();
    for (_, tokens) in &lexed {
        for (from, targets) in type_references(tokens, &known) {
            for to in targets {
                graph.add_edge(&from, &to, EdgeKind::Call);
            }
        }
    }
    TranslatedGraph { graph, declarations }
}

/// Source class name to its simple (unqualified, innermost) name.
pub fn default_mapping(source: &DependencyGraph) -> BTreeMap<String, String> {
    source
        .nodes
        .iter()
        .map(|n| (n.clone(), n.rsplit('.').next().unwrap_or(n).to_string()))
        .collect()
}

/// Errors for source edges whose image is missing; warnings for translated
/// edges with no source preimage. Edge kinds are not compared.
pub fn compare_graphs(
    source: &DependencyGraph,
    translated: &TranslatedGraph,
    mapping: &BTreeMap<String, String>,
) -> Result<Vec<IssueRecord>> {
    let image = |n: &str| mapping.get(n).cloned().unwrap_or_else(|| n.to_string());
    let mut seen: BTreeMap<String, &str> = BTreeMap::new();
    for n in &source.nodes {
        if let Some(prev) = seen.insert(image(n), n) {
            return Err(Error::Mapping(format!("`{prev}` and `{n}` both map to `{}`", image(n))));
        }
    }
    let pairs = |g: &DependencyGraph| -> BTreeSet<(String, String)> {
        g.edges.iter().map(|e| (e.from.clone(), e.to.clone())).collect()
    };
    let mapped: BTreeSet<(String, String)> = pairs(source).into_iter().map(|(a, b)| (image(&a), image(&b))).collect();
    let actual = pairs(&translated.graph);
    let locate = |name: &str, severity, message: String| {
        let issue = IssueRecord::new("", severity, IssueSource::GraphDiff, message).rule("dependency_edge");
        match translated.declarations.get(name) {
            Some((file, line, col)) => IssueRecord { file: file.clone(), ..issue }.at(*line, *col),
            None => IssueRecord {
                file: format!("{name}.swift"),
                ..issue
            },
        }
    };
    let mut out = Vec::new();
    for (a, b) in mapped.difference(&actual) {
        out.push(locate(a, Severity::Error, format!("dependency {a} -> {b} from the source project is missing")));
    }
    for (a, b) in actual.difference(&mapped) {
        out.push(locate(a, Severity::Warning, format!("dependency {a} -> {b} has no counterpart in the source project")));
    }
    Ok(out)
}
