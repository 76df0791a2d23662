//! Run configuration, loaded from TOML and overridden from the command line.

use std::path::Path;

use perspfit_core::camera::{approx_focal, focal_from_fov};
use perspfit_core::fitting::FitConfig;
use perspfit_core::smoothing::OneEuroConfig;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::synth::SyntheticSceneSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FocalSource {
    /// The image diagonal in pixels.
    #[default]
    Approximate,
    Explicit { pixels: f64 },
    /// Diagonal field of view.
    Fov { degrees: f64 },
}

impl FocalSource {
    pub fn resolve(&self, width: f64, height: f64) -> Result<f64> {
        match *self {
            FocalSource::Approximate => Ok(approx_focal(width, height)),
            FocalSource::Explicit { pixels } if pixels > 0.0 => Ok(pixels),
            FocalSource::Explicit { pixels } => Err(PipelineError::Config(format!("focal length {pixels} must be positive"))),
            FocalSource::Fov { degrees } => Ok(focal_from_fov(width, height, degrees.to_radians())?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrackingPolicy {
    /// Highest summed confidence, preferring the detection nearest the
    /// previous frame's pick when it is competitive.
    #[default]
    HighestConfidence,
    PersonIndex(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    /// Multipliers of the configured focal length.
    pub focal_factors: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            focal_factors: vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0],
            iterations: vec![10, 25, 50, 100, 200],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fit: FitConfig,
    pub focal: FocalSource,
    pub smoothing: OneEuroConfig,
    pub smoothing_enabled: bool,
    pub tracking: TrackingPolicy,
    pub synthetic: SyntheticSceneSpec,
    pub sweep: SweepSpec,
    /// Worker threads for frame-parallel fitting; 0 uses all cores.
    pub workers: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            focal: FocalSource::Approximate,
            smoothing: OneEuroConfig::default(),
            smoothing_enabled: true,
            tracking: TrackingPolicy::HighestConfidence,
            synthetic: SyntheticSceneSpec::default(),
            sweep: SweepSpec::default(),
            workers: 0,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration is always representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        self.smoothing.validate()?;
        self.synthetic.validate()?;
        if self.fit.focal_override.is_some() && self.focal != FocalSource::Approximate {
            return Err(PipelineError::Config(
                "set the focal length either through `focal` or `fit.focal_override`, not both".into(),
            ));
        }
        Ok(())
    }

    /// Fitting configuration with the focal source resolved for one image size.
    pub fn fit_config_for(&self, width: f64, height: f64) -> Result<FitConfig> {
        let mut cfg = self.fit.clone();
        if cfg.focal_override.is_none() {
            cfg.focal_override = Some(self.focal.resolve(width, height)?);
        }
        Ok(cfg)
    }
}
