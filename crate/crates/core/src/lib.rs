//! Array access trace analysis.
//!
//! The pipeline reads per-access logs produced by an instrumented program,
//! groups them per array, extracts and deduplicates access patterns,
//! sequences each pattern into shape-coded slices and aggregates array usage
//! statistics.
//!
//! * [`trace_model`]: shared value types
//! * [`trace_io`]: raw, grouped and class-map file formats
//! * [`pattern_extract`]: external group-by, thread normalization, dedup
//! * [`sequencer`]: shape predicates and two-round sequencing
//! * [`stats`]: mergeable usage statistics and report output
//! * [`pipeline`]: input loading and the combined analysis pass
//! * [`synth`]: synthetic traces with ground truth

pub mod error;
pub mod pattern_extract;
pub mod pipeline;
pub mod sequencer;
pub mod stats;
pub mod synth;
pub mod trace_io;
pub mod trace_model;

pub use error::{Error, Result};
