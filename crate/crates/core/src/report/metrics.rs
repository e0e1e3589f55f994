use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::validation::ValidationReport;

/// Rounds half away from zero to `decimals` places.
pub fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

/// `100 * part / whole` rounded to `decimals` places.
pub fn percent(part: usize, whole: usize, decimals: i32) -> Result<f64> {
    if whole == 0 {
        return Err(Error::Argument("percentage of an empty population".into()));
    }
    Ok(round_to(100.0 * part as f64 / whole as f64, decimals))
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectMetrics {
    pub project: String,
    pub total_files: usize,
    pub valid_pct_before: f64,
    pub valid_pct_after: f64,
    pub syntax_before: usize,
    pub syntax_after: usize,
    pub lint_before: usize,
    pub lint_after: usize,
    /// Exact valid-file counts when known; otherwise recovered from the
    /// rounded percentages.
    #[serde(skip)]
    pub valid_counts: Option<(usize, usize)>,
}

impl ProjectMetrics {
    /// A row given as published: percentages, no exact counts.
    pub fn from_row(
        project: &str,
        total_files: usize,
        valid_pct: (f64, f64),
        syntax: (usize, usize),
        lint: (usize, usize),
    ) -> Result<Self> {
        for pct in [valid_pct.0, valid_pct.1] {
            if !(0.0..=100.0).contains(&pct) {
                return Err(Error::Argument(format!("valid percentage {pct} outside 0..=100 for {project}")));
            }
        }
        Ok(Self {
            project: project.to_string(),
            total_files,
            valid_pct_before: valid_pct.0,
            valid_pct_after: valid_pct.1,
            syntax_before: syntax.0,
            syntax_after: syntax.1,
            lint_before: lint.0,
            lint_after: lint.1,
            valid_counts: None,
        })
    }

    pub fn valid_files(&self) -> (usize, usize) {
        self.valid_counts.unwrap_or_else(|| {
            let back = |pct: f64| (pct * self.total_files as f64 / 100.0).round() as usize;
            (back(self.valid_pct_before), back(self.valid_pct_after))
        })
    }
}

pub fn compute_project_metrics(project: &str, before: &ValidationReport, after: &ValidationReport) -> Result<ProjectMetrics> {
    let total = before.files.len();
    if total == 0 {
        return Err(Error::Argument(format!("project {project} has no translated files")));
    }
    if !before.files.keys().eq(after.files.keys()) {
        return Err(Error::Argument(format!(
            "before and after reports for {project} cover different file sets"
        )));
    }
    let (vb, va) = (before.valid_files(), after.valid_files());
    Ok(ProjectMetrics {
        project: project.to_string(),
        total_files: total,
        valid_pct_before: percent(vb, total, 1)?,
        valid_pct_after: percent(va, total, 1)?,
        syntax_before: before.syntax_errors(),
        syntax_after: after.syntax_errors(),
        lint_before: before.lint_issues(),
        lint_after: after.lint_issues(),
        valid_counts: Some((vb, va)),
    })
}

/// The totals row. Valid percentages are recomputed from file counts, not
/// averaged.
pub fn aggregate_metrics(rows: &[ProjectMetrics]) -> Result<ProjectMetrics> {
    if rows.is_empty() {
        return Err(Error::Argument("no projects to aggregate".into()));
    }
    let sum = |f: fn(&ProjectMetrics) -> usize| rows.iter().map(f).sum::<usize>();
    let total_files = sum(|r| r.total_files);
    let vb = sum(|r| r.valid_files().0);
    let va = sum(|r| r.valid_files().1);
    let (valid_pct_before, valid_pct_after) = if total_files == 0 {
        (0.0, 0.0)
    } else {
        (percent(vb, total_files, 1)?, percent(va, total_files, 1)?)
    };
    Ok(ProjectMetrics {
        project: "Total".into(),
        total_files,
        valid_pct_before,
        valid_pct_after,
        syntax_before: sum(|r| r.syntax_before),
        syntax_after: sum(|r| r.syntax_after),
        lint_before: sum(|r| r.lint_before),
        lint_after: sum(|r| r.lint_after),
        valid_counts: Some((vb, va)),
    })
}
