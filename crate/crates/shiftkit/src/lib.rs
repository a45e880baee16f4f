//! Files, experiment protocols and reports around `shiftkit-core`.
//!
//! - [`te_csv`]: process-run CSV reading and writing
//! - [`checkpoint`]: JSON checkpoints for nets and dictionaries
//! - [`config`]: experiment configuration
//! - [`domains`]: building one labeled dataset per domain
//! - [`protocol`]: pairwise and multi-source runs with baselines
//! - [`report`]: records, aggregates, CSV/JSON output

pub mod checkpoint;
pub mod config;
pub mod domains;
mod error;
pub mod protocol;
pub mod report;
pub mod te_csv;

pub use error::{Error, Result};
pub use shiftkit_core as core;
