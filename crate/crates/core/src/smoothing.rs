//! OneEuro filtering of per-frame skeletons.
//!
//! Joint positions are filtered per coordinate in millimeters, so the speed
//! coefficient `beta` acts on mm/s. Part orientations are filtered as unit
//! quaternions, sign-aligned to the previous sample and renormalized.

use std::f64::consts::PI;

use nalgebra::{Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body::PartOrientations;
use crate::geometry::RotationMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum SmoothingError {
    #[error("timestamp {t} does not follow previous timestamp {prev}")]
    NonMonotoneTime { prev: f64, t: f64 },
    #[error("non-finite filter input {0}")]
    NonFinite(f64),
    #[error("invalid OneEuro configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("frame has {found} joints, expected {expected}")]
    JointCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneEuroConfig {
    /// Hz.
    pub min_cutoff: f64,
    pub beta: f64,
    /// Cutoff of the derivative filter, Hz.
    pub d_cutoff: f64,
    /// Sample rate assumed when timestamps are absent, Hz.
    pub nominal_rate: f64,
}

impl Default for OneEuroConfig {
    fn default() -> Self {
        Self {
            min_cutoff: 1.0,
            beta: 0.007,
            d_cutoff: 1.0,
            nominal_rate: 30.0,
        }
    }
}

impl OneEuroConfig {
    pub fn validate(&self) -> Result<(), SmoothingError> {
        if !(self.min_cutoff > 0.0) {
            return Err(SmoothingError::InvalidConfig("min_cutoff must be positive"));
        }
        if !(self.d_cutoff > 0.0) {
            return Err(SmoothingError::InvalidConfig("d_cutoff must be positive"));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(SmoothingError::InvalidConfig("beta must be non-negative"));
        }
        if !(self.nominal_rate > 0.0) {
            return Err(SmoothingError::InvalidConfig("nominal_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OneEuroState {
    pub prev_value: f64,
    pub prev_derivative: f64,
    pub prev_timestamp: f64,
    pub initialized: bool,
}

/// Smoothing factor of an exponential filter with cutoff `fc` at period `te`.
pub fn smoothing_factor(fc: f64, te: f64) -> f64 {
    1.0 / (1.0 + 1.0 / (2.0 * PI * fc * te))
}

pub fn one_euro_step(state: &mut OneEuroState, x: f64, t: f64, cfg: &OneEuroConfig) -> Result<f64, SmoothingError> {
    if !x.is_finite() {
        return Err(SmoothingError::NonFinite(x));
    }
    if !t.is_finite() {
        return Err(SmoothingError::NonFinite(t));
    }
    if !state.initialized {
        *state = OneEuroState {
            prev_value: x,
            prev_derivative: 0.0,
            prev_timestamp: t,
            initialized: true,
        };
        return Ok(x);
    }
    if t <= state.prev_timestamp {
        return Err(SmoothingError::NonMonotoneTime {
            prev: state.prev_timestamp,
            t,
        });
    }
    let te = t - state.prev_timestamp;
    let a_d = smoothing_factor(cfg.d_cutoff, te);
    let dx = (x - state.prev_value) / te;
    let dx_hat = state.prev_derivative + a_d * (dx - state.prev_derivative);
    let fc = cfg.min_cutoff + cfg.beta * dx_hat.abs();
    let a = smoothing_factor(fc, te);
    let x_hat = state.prev_value + a * (x - state.prev_value);
    *state = OneEuroState {
        prev_value: x_hat,
        prev_derivative: dx_hat,
        prev_timestamp: t,
        initialized: true,
    };
    Ok(x_hat)
}

/// Positions in meters and part orientations at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedSkeleton {
    pub timestamp: f64,
    pub joints3d: Vec<Vector3<f64>>,
    pub parts: PartOrientations,
}

fn to_quaternion(r: &RotationMatrix) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r.matrix()))
}

fn from_quaternion(q: &UnitQuaternion<f64>) -> RotationMatrix {
    RotationMatrix::from_matrix_unchecked(q.to_rotation_matrix().into_inner())
}

/// Filter bank for one track; reset whenever the track breaks.
struct TrackFilter {
    joints: Vec<[OneEuroState; 3]>,
    parts: Vec<[OneEuroState; 4]>,
    prev_quats: Vec<Option<Quaternion<f64>>>,
}

impl TrackFilter {
    fn new(num_joints: usize, num_parts: usize) -> Self {
        Self {
            joints: vec![[OneEuroState::default(); 3]; num_joints],
            parts: vec![[OneEuroState::default(); 4]; num_parts],
            prev_quats: vec![None; num_parts],
        }
    }

    fn step(&mut self, frame: &TimedSkeleton, cfg: &OneEuroConfig) -> Result<TimedSkeleton, SmoothingError> {
        let t = frame.timestamp;
        let mut joints3d = Vec::with_capacity(frame.joints3d.len());
        for (p, states) in frame.joints3d.iter().zip(self.joints.iter_mut()) {
            let mut out = Vector3::zeros();
            for c in 0..3 {
                out[c] = one_euro_step(&mut states[c], p[c] * 1000.0, t, cfg)? / 1000.0;
            }
            joints3d.push(out);
        }
        let mut parts = frame.parts;
        for (i, (_, r)) in frame.parts.iter().enumerate() {
            let mut q = *to_quaternion(r).quaternion();
            if let Some(prev) = self.prev_quats[i] {
                if q.coords.dot(&prev.coords) < 0.0 {
                    q = -q;
                }
            }
            self.prev_quats[i] = Some(q);
            let mut filtered = [0.0; 4];
            for (c, v) in filtered.iter_mut().enumerate() {
                *v = one_euro_step(&mut self.parts[i][c], q.coords[c], t, cfg)?;
            }
            let fq = Quaternion::from(nalgebra::Vector4::from(filtered));
            parts.0[i] = from_quaternion(&UnitQuaternion::from_quaternion(fq));
        }
        Ok(TimedSkeleton {
            timestamp: t,
            joints3d,
            parts,
        })
    }
}

/// Filters a single-person track in time order. `None` entries are frames
/// without a fit; they stay `None` and restart the filter.
pub fn smooth_sequence(
    frames: &[Option<TimedSkeleton>],
    cfg: &OneEuroConfig,
) -> Result<Vec<Option<TimedSkeleton>>, SmoothingError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(frames.len());
    let mut filter: Option<TrackFilter> = None;
    let mut expected = None;
    for frame in frames {
        let Some(frame) = frame else {
            filter = None;
            out.push(None);
            continue;
        };
        let expected = *expected.get_or_insert(frame.joints3d.len());
        if frame.joints3d.len() != expected {
            return Err(SmoothingError::JointCount {
                expected,
                found: frame.joints3d.len(),
            });
        }
        let f = filter.get_or_insert_with(|| TrackFilter::new(expected, frame.parts.0.len()));
        out.push(Some(f.step(frame, cfg)?));
    }
    Ok(out)
}
