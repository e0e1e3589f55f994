//! Dependency-ordered Java (Android) to Swift (iOS) translation pipeline.
//!
//! The crate is organised around the three cooperating stages of the
//! pipeline plus the supporting machinery:
//!
//! - [`source`]: tree-sitter parsing, class/method extraction with exact byte
//!   spans, and the typed dependency graph.
//! - [`knowledge`]: document ingestion, crawling, embedding and an exact
//!   cosine index used to retrieve specification context.
//! - [`scheduler`]: the bottom-up translation plan (components, classes,
//!   methods) with SCC condensation for cyclic code.
//! - [`prompt`]: the method/class/component/project prompt templates and
//!   context budgeting.
//! - [`backend`]: pluggable translation backends (deterministic mock, live
//!   chat-completion client) and code extraction from responses.
//! - [`validation`]: reference checks, graph comparison, platform residue
//!   scanning, external syntax/lint tools and the bounded refinement loop.
//! - [`report`]: project metrics, aggregation, issue taxonomy and review
//!   sampling.
//! - [`pipeline`]: configuration, resumable state and the staged runner.

pub mod backend;
pub mod error;
pub mod knowledge;
pub mod pipeline;
pub mod prompt;
pub mod registry;
pub mod report;
pub mod scheduler;
pub mod source;
pub mod validation;

pub use error::{Error, Result};
