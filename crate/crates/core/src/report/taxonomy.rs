use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::metrics::percent;
use crate::error::{Error, Result};
use crate::validation::{IssueRecord, IssueSource, ResidueCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueLevel {
    Method,
    File,
    Package,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaxonomyCategory {
    #[serde(rename = "Linting/Code Quality")]
    Linting,
    #[serde(rename = "Syntax Error")]
    Syntax,
    #[serde(rename = "Error Handling")]
    ErrorHandling,
    #[serde(rename = "Dependency Mismatch–Internal Reference")]
    InternalReference,
    #[serde(rename = "Incomplete Translation")]
    Incomplete,
    #[serde(rename = "Dependency Mismatch–Third-party Libraries")]
    ThirdParty,
    #[serde(rename = "Performance Concerns")]
    Performance,
    #[serde(rename = "Platform-Specific–Design Features")]
    Design,
    #[serde(rename = "Platform-Specific–System Settings")]
    SystemSettings,
    #[serde(rename = "Data Storage Inconsistency")]
    DataStorage,
    /// No rule fired; left for a human reviewer.
    Unclassified,
}

impl TaxonomyCategory {
    /// The ten categories, method-level first.
    pub const ALL: [TaxonomyCategory; 10] = [
        TaxonomyCategory::Linting,
        TaxonomyCategory::Syntax,
        TaxonomyCategory::ErrorHandling,
        TaxonomyCategory::InternalReference,
        TaxonomyCategory::Incomplete,
        TaxonomyCategory::ThirdParty,
        TaxonomyCategory::Performance,
        TaxonomyCategory::Design,
        TaxonomyCategory::SystemSettings,
        TaxonomyCategory::DataStorage,
    ];

    pub fn level(self) -> Option<IssueLevel> {
        use TaxonomyCategory::*;
        match self {
            Linting | Syntax | ErrorHandling => Some(IssueLevel::Method),
            InternalReference | Incomplete => Some(IssueLevel::File),
            ThirdParty | Performance | Design | SystemSettings | DataStorage => Some(IssueLevel::Package),
            Unclassified => None,
        }
    }

    pub fn label(self) -> &'static str {
        use TaxonomyCategory::*;
        match self {
            Linting => "Linting/Code Quality",
            Syntax => "Syntax Error",
            ErrorHandling => "Error Handling",
            InternalReference => "Dependency Mismatch–Internal Reference",
            Incomplete => "Incomplete Translation",
            ThirdParty => "Dependency Mismatch–Third-party Libraries",
            Performance => "Performance Concerns",
            Design => "Platform-Specific–Design Features",
            SystemSettings => "Platform-Specific–System Settings",
            DataStorage => "Data Storage Inconsistency",
            Unclassified => "Unclassified",
        }
    }
}

impl fmt::Display for TaxonomyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyLabel {
    pub category: TaxonomyCategory,
    pub level: Option<IssueLevel>,
}

impl From<TaxonomyCategory> for TaxonomyLabel {
    fn from(category: TaxonomyCategory) -> Self {
        Self {
            category,
            level: category.level(),
        }
    }
}

/// Rule cascade on the issue's source and, for platform residue, the rule
/// table category encoded in its rule id.
pub fn classify_issue(issue: &IssueRecord) -> TaxonomyLabel {
    use TaxonomyCategory::*;
    let category = match issue.source {
        IssueSource::Lint => Linting,
        IssueSource::Syntax => Syntax,
        IssueSource::InternalReference => InternalReference,
        IssueSource::GraphDiff if issue.is_error() => InternalReference,
        IssueSource::GraphDiff => Unclassified,
        IssueSource::Platform => match issue.rule.as_deref().and_then(ResidueCategory::from_rule_id) {
            Some(ResidueCategory::ThirdParty) => ThirdParty,
            Some(ResidueCategory::Design) => Design,
            Some(ResidueCategory::SystemSettings) => SystemSettings,
            Some(ResidueCategory::Storage) => DataStorage,
            Some(ResidueCategory::ErrorHandling) => ErrorHandling,
            Some(ResidueCategory::Incomplete) => Incomplete,
            Some(ResidueCategory::Performance) => Performance,
            None => Unclassified,
        },
    };
    category.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyRow {
    pub category: TaxonomyCategory,
    pub level: Option<IssueLevel>,
    pub count: usize,
    pub pct: f64,
}

/// One row per category (Unclassified only when present), percentages of
/// `population` to two decimals. Categories outside `counts` get zero.
pub fn taxonomy_rows(counts: &BTreeMap<TaxonomyCategory, usize>, population: usize) -> Result<Vec<TaxonomyRow>> {
    let total: usize = counts.values().sum();
    if total > population {
        return Err(Error::Argument(format!("{total} labelled issues exceed the population of {population}")));
    }
    if population == 0 {
        return Ok(Vec::new());
    }
    let unclassified = counts.get(&TaxonomyCategory::Unclassified).copied().unwrap_or(0);
    let mut cats = TaxonomyCategory::ALL.to_vec();
    if unclassified > 0 {
        cats.push(TaxonomyCategory::Unclassified);
    }
    cats.into_iter()
        .map(|category| {
            let count = counts.get(&category).copied().unwrap_or(0);
            Ok(TaxonomyRow {
                category,
                level: category.level(),
                count,
                pct: percent(count, population, 2)?,
            })
        })
        .collect()
}

pub fn count_labels(labels: &[TaxonomyLabel]) -> BTreeMap<TaxonomyCategory, usize> {
    let mut counts = BTreeMap::new();
    for l in labels {
        *counts.entry(l.category).or_insert(0) += 1;
    }
    counts
}
