//! Run configuration, resumable state and the staged runner.

mod config;
mod runner;
mod state;

pub use config::{BackendSection, CrawlSettings, KnowledgeSettings, RunConfig, SampleSettings, ValidationSettings};
pub use runner::{Analysis, Pipeline, RefinementSummary, RunOptions, StageReport, UnitArtifact};
pub use state::{write_atomic, InputHasher, PipelineState, Stage, UnitStatus, STATE_FILE};
