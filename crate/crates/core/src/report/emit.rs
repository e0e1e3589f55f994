use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::ProjectMetrics;
use super::sample::SampleSet;
use super::taxonomy::TaxonomyRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Argument(format!("unknown report format `{other}` (expected json or markdown)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub projects: Vec<ProjectMetrics>,
    pub total: ProjectMetrics,
    pub taxonomy: Vec<TaxonomyRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sample: Option<SampleSet>,
}

pub fn emit_report(report: &Report, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(report)
            .map(|s| s + "\n")
            .map_err(|e| Error::json("report", e)),
        ReportFormat::Markdown => Ok(markdown(report)),
    }
}

fn markdown(report: &Report) -> String {
    let mut out = String::from("# Translation results\n\n");
    out.push_str("| Project | Files | Valid % (before) | Valid % (after) | Syntax (before) | Syntax (after) | Lint (before) | Lint (after) |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for (m, bold) in report.projects.iter().map(|m| (m, false)).chain([(&report.total, true)]) {
        let name = if bold { format!("**{}**", m.project) } else { m.project.clone() };
        let _ = writeln!(
            out,
            "| {name} | {} | {:.1} | {:.1} | {} | {} | {} | {} |",
            m.total_files, m.valid_pct_before, m.valid_pct_after, m.syntax_before, m.syntax_after, m.lint_before, m.lint_after
        );
    }
    out.push_str("\n## Issue taxonomy\n\n");
    if report.taxonomy.iter().all(|r| r.count == 0) {
        out.push_str("no issues sampled\n");
    } else {
        out.push_str("| Category | Level | Count | % |\n|---|---|---:|---:|\n");
        for r in &report.taxonomy {
            let level = r.level.map_or("-".to_string(), |l| format!("{l:?}").to_lowercase());
            let _ = writeln!(out, "| {} | {level} | {} | {:.2} |", r.category, r.count, r.pct);
        }
    }
    if let Some(s) = &report.sample {
        let _ = writeln!(
            out,
            "\nReview sample: {} of {} issues ({:.0}% confidence, {:.0}% margin, seed {}).",
            s.sample_size,
            s.population,
            s.confidence * 100.0,
            s.margin * 100.0,
            s.seed
        );
    }
    out
}
