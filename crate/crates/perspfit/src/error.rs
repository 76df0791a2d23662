use std::path::PathBuf;

use perspfit_core::{body::BodyError, camera::CameraError, fitting::FitError, metrics::MetricsError, smoothing::SmoothingError};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_UNFITTABLE: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}{}: {message}", path.display(), frame.map(|f| format!(" (frame {f})")).unwrap_or_default())]
    Parse {
        path: PathBuf,
        frame: Option<usize>,
        message: String,
    },
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no keypoint has positive confidence")]
    NoConfidentKeypoints,
    #[error("synthetic scene: {0}")]
    Synthetic(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
}

impl PipelineError {
    pub fn parse(path: impl Into<PathBuf>, frame: Option<usize>, message: impl ToString) -> Self {
        Self::Parse {
            path: path.into(),
            frame,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } => EXIT_PARSE,
            _ => EXIT_USAGE,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
