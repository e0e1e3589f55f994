use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueSource {
    Syntax,
    Lint,
    InternalReference,
    GraphDiff,
    Platform,
}

impl IssueSource {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueSource::Syntax => "syntax",
            IssueSource::Lint => "lint",
            IssueSource::InternalReference => "internal_reference",
            IssueSource::GraphDiff => "graph_diff",
            IssueSource::Platform => "platform",
        }
    }
}

impl fmt::Display for IssueSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IssueRecord {
    pub file: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub severity: Severity,
    pub rule: Option<String>,
    pub message: String,
    pub source: IssueSource,
}

impl IssueRecord {
    pub fn new(file: &str, severity: Severity, source: IssueSource, message: impl Into<String>) -> Self {
        Self {
            file: file.to_string(),
            line: None,
            column: None,
            severity,
            rule: None,
            message: message.into(),
            source,
        }
    }

    pub fn at(mut self, line: usize, column: usize) -> Self {
        self.line = Some(line.max(1));
        self.column = Some(column.max(1));
        self
    }

    pub fn rule(mut self, rule: impl Into<String>) -> Self {
        self.rule = Some(rule.into());
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Canonical `path:line:col: severity: message (rule)` form.
impl fmt::Display for IssueRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
            if let Some(col) = self.column {
                write!(f, ":{col}")?;
            }
        }
        write!(f, ": {}: {}", self.severity.as_str(), self.message)?;
        if let Some(rule) = &self.rule {
            write!(f, " ({rule})")?;
        }
        Ok(())
    }
}

static DIAGNOSTIC: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<file>[^:\s][^:]*?):(?P<line>\d+)(?::(?P<col>\d+))?:\s*(?P<sev>error|warning):\s*(?P<msg>.*?)\s*$").unwrap()
});
static RULE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(?P<msg>.*?)\s*\((?P<rule>[a-z][a-z0-9_]*)\)$").unwrap());
static LOCATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[^:\s][^:]*?:\d+(:\d+)?:").unwrap());

/// Parses one `path:line:col: severity: message (rule_id)` diagnostic.
pub fn parse_diagnostic_line(line: &str, source: IssueSource) -> Option<IssueRecord> {
    let caps = DIAGNOSTIC.captures(line.trim_end())?;
    let severity = match &caps["sev"] {
        "error" => Severity::Error,
        _ => Severity::Warning,
    };
    let raw = &caps["msg"];
    let (message, rule) = match RULE.captures(raw) {
        Some(r) => (r["msg"].to_string(), Some(r["rule"].to_string())),
        None => (raw.to_string(), None),
    };
    let line_no: usize = caps["line"].parse().ok()?;
    let col: Option<usize> = caps.name("col").and_then(|c| c.as_str().parse().ok());
    if line_no == 0 || col == Some(0) {
        return None;
    }
    Some(IssueRecord {
        file: caps["file"].to_string(),
        line: Some(line_no),
        column: col,
        severity,
        rule,
        message,
        source,
    })
}

/// Parses tool output. Diagnostics wrapped over up to three lines are
/// rejoined; returns the issues and the number of lines left unparsed.
pub fn parse_diagnostics(output: &str, source: IssueSource) -> (Vec<IssueRecord>, usize) {
    let mut issues = Vec::new();
    let mut skipped = 0;
    let mut pending: Vec<&str> = Vec::new();
    for line in output.lines() {
        if line.trim().is_empty() {
            skipped += pending.len();
            pending.clear();
            continue;
        }
        if LOCATION.is_match(line) {
            skipped += pending.len();
            pending.clear();
        } else if pending.is_empty() {
            skipped += 1;
            continue;
        }
        pending.push(line.trim());
        let joined = pending.join(" ");
        match parse_diagnostic_line(&joined, source) {
            Some(issue) if issue.rule.is_some() || !issue.message.is_empty() && !ends_open(&joined) => {
                issues.push(issue);
                pending.clear();
            }
            _ if pending.len() >= 3 => {
                skipped += pending.len();
                pending.clear();
            }
            _ => {}
        }
    }
    skipped += pending.len();
    (issues, skipped)
}

/// A rule-less diagnostic ending in `;` or `:` is probably wrapped.
fn ends_open(text: &str) -> bool {
    text.ends_with(';') || text.ends_with(':')
}
