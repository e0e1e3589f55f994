use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::issue::{IssueRecord, IssueSource, Severity};
use crate::error::{Error, Result};
use crate::source::line_col;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidueCategory {
    ThirdParty,
    Design,
    SystemSettings,
    Storage,
    ErrorHandling,
    Incomplete,
    Performance,
}

impl ResidueCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ResidueCategory::ThirdParty => "third_party",
            ResidueCategory::Design => "design",
            ResidueCategory::SystemSettings => "system_settings",
            ResidueCategory::Storage => "storage",
            ResidueCategory::ErrorHandling => "error_handling",
            ResidueCategory::Incomplete => "incomplete",
            ResidueCategory::Performance => "performance",
        }
    }

    pub fn from_rule_id(rule: &str) -> Option<Self> {
        let prefix = rule.split('.').next()?;
        serde_json::from_value(serde_json::Value::String(prefix.to_string())).ok()
    }
}

impl fmt::Display for ResidueCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidueRule {
    pub id: String,
    pub category: ResidueCategory,
    pub severity: Severity,
    pub pattern: String,
    pub hint: String,
}

#[derive(Deserialize)]
struct RuleFile {
    version: u32,
    rules: Vec<ResidueRule>,
}

/// Versioned table of source-platform patterns.
#[derive(Debug, Clone)]
pub struct ResidueRules {
    pub version: u32,
    rules: Vec<(ResidueRule, Regex)>,
}

impl ResidueRules {
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../rules/residue.json")).expect("bundled residue rules are valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: RuleFile = serde_json::from_str(text).map_err(|e| Error::json("residue rules", e))?;
        let rules = file
            .rules
            .into_iter()
            .map(|r| {
                let re = Regex::new(&r.pattern)
                    .map_err(|e| Error::Config(format!("residue rule `{}` has a bad pattern: {e}", r.id)))?;
                Ok((r, re))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            version: file.version,
            rules,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn rules(&self) -> impl Iterator<Item = &ResidueRule> {
        self.rules.iter().map(|(r, _)| r)
    }

    /// Byte ranges of every match.
    pub fn spans(&self, text: &str) -> Vec<Range<usize>> {
        self.rules
            .iter()
            .flat_map(|(_, re)| re.find_iter(text).map(|m| m.range()))
            .collect()
    }
}

/// One platform issue per rule match, rule id `category.id`.
pub fn platform_scan(file: &str, text: &str, rules: &ResidueRules) -> Vec<IssueRecord> {
    let mut out = Vec::new();
    for (rule, re) in &rules.rules {
        for m in re.find_iter(text) {
            let (line, col) = line_col(text, m.start());
            out.push(
                IssueRecord::new(
                    file,
                    rule.severity,
                    IssueSource::Platform,
                    format!("platform residue `{}`: {}", m.as_str(), rule.hint),
                )
                .at(line, col)
                .rule(format!("{}.{}", rule.category, rule.id)),
            );
        }
    }
    out.sort();
    out
}

/// Platform symbols that need no definition in the translated set.
#[derive(Debug, Clone, Default)]
pub struct Allowlist {
    names: BTreeSet<String>,
    prefixes: Vec<String>,
}

impl Allowlist {
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../rules/swift_allowlist.txt"))
    }

    /// One symbol per line; `prefix:XY` entries; `#` comments.
    pub fn parse(text: &str) -> Self {
        let mut list = Self::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            match line.strip_prefix("prefix:") {
                Some(p) => list.prefixes.push(p.trim().to_string()),
                None => {
                    list.names.insert(line.to_string());
                }
            }
        }
        list
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn allows(&self, name: &str) -> bool {
        self.names.contains(name)
            || self.prefixes.iter().any(|p| {
                name.strip_prefix(p.as_str())
                    .and_then(|rest| rest.chars().next())
                    .is_some_and(char::is_uppercase)
            })
    }
}
