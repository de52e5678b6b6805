//! File formats, configuration, orchestration and the `amc` command line
//! around the `amc-core` model.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod plot;

pub use config::PipelineConfig;
pub use error::{AmcError, Result};
