//! File ingestion, synthetic scenes, experiment harnesses and reports around
//! [`perspfit_core`].

pub mod config;
pub mod error;
pub mod harness;
pub mod io;
pub mod plot;
pub mod report;
pub mod synth;

pub use config::RunConfig;
pub use error::{PipelineError, Result};
