use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::issue::{IssueRecord, IssueSource, Severity};
use super::residue::{Allowlist, ResidueRules};
use super::swift::{declared_names, lex, referenced_names};
use crate::source::ClassDescriptor;

/// One translated file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwiftUnit {
    pub file: String,
    pub code: String,
}

impl SwiftUnit {
    pub fn new(file: impl Into<String>, code: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            code: code.into(),
        }
    }
}

/// Names defined anywhere in the translated set. Units that do not lex are
/// skipped (the syntax check reports them).
pub fn project_definitions(units: &[SwiftUnit]) -> BTreeSet<String> {
    units
        .iter()
        .filter_map(|u| lex(&u.code).ok())
        .flat_map(|t| declared_names(&t))
        .collect()
}

/// Where each class and method name lives in the Java source.
pub fn source_symbols(classes: &[ClassDescriptor]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for c in classes {
        out.entry(c.simple_name.clone()).or_insert_with(|| c.qualified_name.clone());
        for m in &c.methods {
            out.entry(m.name.clone()).or_insert_with(|| m.id.clone());
        }
    }
    out
}

pub struct ReferenceContext<'a> {
    pub defined: &'a BTreeSet<String>,
    pub source_symbols: &'a BTreeMap<String, String>,
    pub allowlist: &'a Allowlist,
    pub residue: &'a ResidueRules,
}

/// One issue per unresolved symbol in `unit`, at its first occurrence.
/// Symbols inside a platform residue match are left to the platform scan.
pub fn check_unit_references(unit: &SwiftUnit, ctx: &ReferenceContext<'_>) -> Vec<IssueRecord> {
    let Ok(tokens) = lex(&unit.code) else { return Vec::new() };
    let local = declared_names(&tokens);
    let residue = ctx.residue.spans(&unit.code);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for r in referenced_names(&tokens) {
        if local.contains(&r.name)
            || ctx.defined.contains(&r.name)
            || ctx.allowlist.allows(&r.name)
            || residue.iter().any(|s| s.contains(&r.offset))
            || !seen.insert(r.name.clone())
        {
            continue;
        }
        let mut message = format!("cannot find '{}' in scope", r.name);
        if let Some(origin) = ctx.source_symbols.get(&r.name) {
            message.push_str(&format!("; defined in the source project as {origin}"));
        }
        out.push(
            IssueRecord::new(&unit.file, Severity::Error, IssueSource::InternalReference, message)
                .at(r.line, r.column)
                .rule("unresolved_reference"),
        );
    }
    out
}

pub fn check_references(
    units: &[SwiftUnit],
    sources: &[ClassDescriptor],
    allowlist: &Allowlist,
    residue: &ResidueRules,
) -> Vec<IssueRecord> {
    let defined = project_definitions(units);
    let symbols = source_symbols(sources);
    let ctx = ReferenceContext {
        defined: &defined,
        source_symbols: &symbols,
        allowlist,
        residue,
    };
    units.iter().flat_map(|u| check_unit_references(u, &ctx)).collect()
}
