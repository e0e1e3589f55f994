use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::issue::{parse_diagnostics, IssueRecord, IssueSource};
use super::references::{check_unit_references, ReferenceContext, SwiftUnit};
use super::residue::platform_scan;
use super::swift::{stub_lint_check, stub_syntax_check};
use super::tools::{run_external_check, CommandTemplate};
use crate::error::{Error, Result};
use crate::knowledge::excerpt;
use crate::registry::Registry;

pub trait Check: Send + Sync {
    fn name(&self) -> &str;
    fn source(&self) -> IssueSource;
    fn run(&self, unit: &SwiftUnit, ctx: &ReferenceContext<'_>) -> Result<Vec<IssueRecord>>;
}

struct StubSyntax;

impl Check for StubSyntax {
    fn name(&self) -> &str {
        "stub-syntax"
    }

    fn source(&self) -> IssueSource {
        IssueSource::Syntax
    }

    fn run(&self, unit: &SwiftUnit, _: &ReferenceContext<'_>) -> Result<Vec<IssueRecord>> {
        Ok(stub_syntax_check(&unit.file, &unit.code))
    }
}

struct StubLint;

impl Check for StubLint {
    fn name(&self) -> &str {
        "stub-lint"
    }

    fn source(&self) -> IssueSource {
        IssueSource::Lint
    }

    fn run(&self, unit: &SwiftUnit, _: &ReferenceContext<'_>) -> Result<Vec<IssueRecord>> {
        Ok(stub_lint_check(&unit.file, &unit.code))
    }
}

struct References;

impl Check for References {
    fn name(&self) -> &str {
        "references"
    }

    fn source(&self) -> IssueSource {
        IssueSource::InternalReference
    }

    fn run(&self, unit: &SwiftUnit, ctx: &ReferenceContext<'_>) -> Result<Vec<IssueRecord>> {
        Ok(check_unit_references(unit, ctx))
    }
}

struct Platform;

impl Check for Platform {
    fn name(&self) -> &str {
        "platform"
    }

    fn source(&self) -> IssueSource {
        IssueSource::Platform
    }

    fn run(&self, unit: &SwiftUnit, ctx: &ReferenceContext<'_>) -> Result<Vec<IssueRecord>> {
        Ok(platform_scan(&unit.file, &unit.code, ctx.residue))
    }
}

/// Runs a command-line tool on a scratch copy of the unit and parses its
/// diagnostics.
struct External {
    name: &'static str,
    source: IssueSource,
    template: CommandTemplate,
    timeout: Duration,
}

impl Check for External {
    fn name(&self) -> &str {
        self.name
    }

    fn source(&self) -> IssueSource {
        self.source
    }

    fn run(&self, unit: &SwiftUnit, _: &ReferenceContext<'_>) -> Result<Vec<IssueRecord>> {
        let dir = tempfile::tempdir().map_err(|e| Error::Tool(format!("cannot create scratch directory: {e}")))?;
        let path = dir.path().join(&unit.file);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, &unit.code).map_err(|e| Error::io(&path, e))?;
        let out = run_external_check(&path, &self.template, self.timeout)?;
        let (mut issues, _) = parse_diagnostics(&out.combined(), self.source);
        if issues.is_empty() && out.status != Some(0) {
            return Err(Error::Tool(format!(
                "`{}` exited with {:?} without diagnostics: {}",
                self.template.raw(),
                out.status,
                excerpt(&out.combined())
            )));
        }
        for issue in &mut issues {
            issue.file = unit.file.clone();
        }
        Ok(issues)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckSettings {
    pub syntax_check_cmd: String,
    pub lint_cmd: String,
    pub timeout_secs: u64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            syntax_check_cmd: "swiftc -parse {file}".into(),
            lint_cmd: "swiftlint lint --path {file}".into(),
            timeout_secs: 60,
        }
    }
}

pub type CheckRegistry = Registry<CheckSettings, dyn Check>;

/// `syntax` and `lint` run the configured tools; `stub-syntax` and
/// `stub-lint` are the bundled stand-ins.
pub fn check_registry() -> CheckRegistry {
    let mut reg = CheckRegistry::new("check");
    reg.register("syntax", |s: &CheckSettings| {
        Ok(Box::new(External {
            name: "syntax",
            source: IssueSource::Syntax,
            template: CommandTemplate::parse(&s.syntax_check_cmd)?,
            timeout: Duration::from_secs(s.timeout_secs),
        }) as Box<dyn Check>)
    });
    reg.register("lint", |s: &CheckSettings| {
        Ok(Box::new(External {
            name: "lint",
            source: IssueSource::Lint,
            template: CommandTemplate::parse(&s.lint_cmd)?,
            timeout: Duration::from_secs(s.timeout_secs),
        }) as Box<dyn Check>)
    });
    reg.register("stub-syntax", |_: &CheckSettings| Ok(Box::new(StubSyntax) as Box<dyn Check>));
    reg.register("stub-lint", |_: &CheckSettings| Ok(Box::new(StubLint) as Box<dyn Check>));
    reg.register("references", |_: &CheckSettings| Ok(Box::new(References) as Box<dyn Check>));
    reg.register("platform", |_: &CheckSettings| Ok(Box::new(Platform) as Box<dyn Check>));
    reg
}

/// Issues per file from one validation pass.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub round: usize,
    pub checks: Vec<String>,
    pub files: BTreeMap<String, Vec<IssueRecord>>,
}

impl ValidationReport {
    pub fn new(round: usize, checks: Vec<String>) -> Self {
        Self {
            round,
            checks,
            files: BTreeMap::new(),
        }
    }

    pub fn touch(&mut self, file: &str) {
        self.files.entry(file.to_string()).or_default();
    }

    pub fn extend(&mut self, issues: impl IntoIterator<Item = IssueRecord>) {
        for issue in issues {
            self.files.entry(issue.file.clone()).or_default().push(issue);
        }
        for list in self.files.values_mut() {
            list.sort();
            list.dedup();
        }
    }

    pub fn issues(&self) -> impl Iterator<Item = &IssueRecord> {
        self.files.values().flatten()
    }

    pub fn error_count(&self) -> usize {
        self.issues().filter(|i| i.is_error()).count()
    }

    pub fn count(&self, source: IssueSource) -> usize {
        self.issues().filter(|i| i.source == source).count()
    }

    pub fn errors(&self, source: IssueSource) -> usize {
        self.issues().filter(|i| i.source == source && i.is_error()).count()
    }

    /// No error-severity issues from `source`.
    pub fn pass(&self, source: IssueSource) -> bool {
        self.errors(source) == 0
    }

    /// Parses cleanly and has no internal-reference or graph-diff errors.
    pub fn file_valid(&self, file: &str) -> bool {
        self.files.get(file).is_some_and(|issues| {
            !issues.iter().any(|i| {
                i.is_error()
                    && matches!(i.source, IssueSource::Syntax | IssueSource::InternalReference | IssueSource::GraphDiff)
            })
        })
    }

    pub fn valid_files(&self) -> usize {
        self.files.keys().filter(|f| self.file_valid(f)).count()
    }

    /// Counts syntax errors and lint issues (any severity), as tabulated.
    pub fn syntax_errors(&self) -> usize {
        self.errors(IssueSource::Syntax)
    }

    pub fn lint_issues(&self) -> usize {
        self.count(IssueSource::Lint)
    }
}

pub fn run_checks(
    unit: &SwiftUnit,
    checks: &[Box<dyn Check>],
    ctx: &ReferenceContext<'_>,
    round: usize,
) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(round, checks.iter().map(|c| c.name().to_string()).collect());
    report.touch(&unit.file);
    for check in checks {
        report.extend(check.run(unit, ctx)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::{Allowlist, ResidueRules};
    use std::collections::BTreeSet;

    fn ctx_parts() -> (BTreeSet<String>, BTreeMap<String, String>, Allowlist, ResidueRules) {
        (BTreeSet::new(), BTreeMap::new(), Allowlist::builtin(), ResidueRules::builtin())
    }

    #[test]
    fn registry_and_report_invariants() {
        let reg = check_registry();
        assert_eq!(
            reg.names().collect::<Vec<_>>(),
            ["lint", "platform", "references", "stub-lint", "stub-syntax", "syntax"]
        );
        let checks: Vec<_> = ["stub-syntax", "stub-lint", "references", "platform"]
            .iter()
            .map(|n| reg.create(n, &CheckSettings::default()).unwrap())
            .collect();
        let (defined, symbols, allow, residue) = ctx_parts();
        let ctx = ReferenceContext {
            defined: &defined,
            source_symbols: &symbols,
            allowlist: &allow,
            residue: &residue,
        };
        let unit = SwiftUnit::new("A.swift", "class A {\n    let init = Helper() \n}\n");
        let report = run_checks(&unit, &checks, &ctx, 0).unwrap();
        assert_eq!(report.errors(IssueSource::Syntax), 1);
        assert!(!report.pass(IssueSource::Syntax));
        assert_eq!(report.errors(IssueSource::InternalReference), 1);
        assert_eq!(report.lint_issues(), 1);
        assert!(!report.file_valid("A.swift"));

        let clean = SwiftUnit::new("B.swift", "class B {}\n");
        let report = run_checks(&clean, &checks, &ctx, 0).unwrap();
        assert!(report.pass(IssueSource::Syntax));
        assert_eq!(report.valid_files(), 1);
    }

    #[test]
    fn bad_command_template_fails_at_creation() {
        let s = CheckSettings {
            syntax_check_cmd: "swiftc -parse".into(),
            ..CheckSettings::default()
        };
        assert!(matches!(check_registry().create("syntax", &s), Err(Error::Config(_))));
    }
}
