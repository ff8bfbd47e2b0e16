//! Configuration-driven experiment harness for the recourse pipeline.
//!
//! Each stage (`prepare`, `train-model`, `publish-points`, `build-graph`,
//! `query`, `evaluate`, `report`) reads upstream artifacts from the output
//! directory and writes plain CSV/JSON artifacts plus a manifest.

pub mod app;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use pipeline::Layout;
