//! Project metrics, the issue taxonomy and review sampling.

mod emit;
mod metrics;
mod sample;
mod taxonomy;

pub use emit::{emit_report, Report, ReportFormat};
pub use metrics::{aggregate_metrics, compute_project_metrics, percent, round_to, ProjectMetrics};
pub use sample::{
    draw_indices, draw_sample, review_sample, sample_size, SampleSet, DEFAULT_CONFIDENCE, DEFAULT_MARGIN, DEFAULT_SEED,
    REFERENCE_REVIEW_SIZE,
};
pub use taxonomy::{classify_issue, count_labels, taxonomy_rows, IssueLevel, TaxonomyCategory, TaxonomyLabel, TaxonomyRow};
