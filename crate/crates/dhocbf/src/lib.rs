//! Scenario files, CSV traces, batch experiments and the `dhocbf`
//! command line on top of `dhocbf-core`.

pub mod cli;
mod error;
pub mod experiments;
pub mod number;
pub mod scenario_file;
pub mod trace_csv;
pub mod validate;

pub use error::{Error, Result};
