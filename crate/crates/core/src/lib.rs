//! Batch ETL and descriptive analytics for long-format food-safety
//! monitoring files.
//!
//! The flow is [`ingest::discover_files`] → [`pipeline::ingest_corpus`] →
//! [`store::Store`] → [`analytics::Dataset`] → [`report::AggregateReport`].
//! [`synth`] generates seeded corpora with exact expected outputs and an
//! independent oracle.

pub mod analytics;
pub mod catalog;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod report;
pub mod schema;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
