//! Checks on translated Swift units and the bounded repair loop.

mod checks;
mod graph_diff;
mod issue;
mod references;
mod refine;
mod residue;
pub mod swift;
mod tools;

pub use checks::{check_registry, run_checks, Check, CheckRegistry, CheckSettings, ValidationReport};
pub use graph_diff::{compare_graphs, default_mapping, translated_graph, TranslatedGraph};
pub use issue::{parse_diagnostic_line, parse_diagnostics, IssueRecord, IssueSource, Severity};
pub use references::{
    check_references, check_unit_references, project_definitions, source_symbols, ReferenceContext, SwiftUnit,
};
pub use refine::{format_issues, repair_prompt, RefineOutcome, RefinementState, Refiner, DEFAULT_MAX_ROUNDS};
pub use residue::{platform_scan, Allowlist, ResidueCategory, ResidueRule, ResidueRules};
pub use tools::{run_external_check, CommandTemplate, ToolOutput, FILE_PLACEHOLDER};
