//! Pinhole camera model and conversion of crop-frame weak-perspective camera
//! parameters to a full-resolution camera translation.
//!
//! Lengths are meters, image coordinates are pixels, angles are radians.
//! The camera frame coincides with the world frame (identity extrinsic
//! rotation) and there is no lens distortion.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side of the square network crop, pixels.
pub const CROP_RESOLUTION: f64 = 224.0;
/// Focal length assumed on the resized crop by the weak-perspective pipeline.
pub const WEAK_CROP_FOCAL: f64 = 5000.0;
/// Minimum camera-frame depth accepted by [`project`], meters.
pub const BEHIND_CAMERA_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("diagonal field of view {0} rad outside (0, π)")]
    InvalidFov(f64),
    #[error("point {index} is behind the camera (depth {depth:.3e} m)")]
    BehindCamera { index: usize, depth: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<f64, CameraError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CameraError::InvalidParameter { name, value })
    }
}

/// `K = [[f, 0, ox], [0, f, oy], [0, 0, 1]]` for a `width × height` image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub focal: f64,
    pub ox: f64,
    pub oy: f64,
    pub width: f64,
    pub height: f64,
}

impl Intrinsics {
    /// Principal point at the image center.
    pub fn centered(focal: f64, width: f64, height: f64) -> Result<Self, CameraError> {
        Self::new(focal, width / 2.0, height / 2.0, width, height)
    }

    pub fn new(focal: f64, ox: f64, oy: f64, width: f64, height: f64) -> Result<Self, CameraError> {
        positive("focal", focal)?;
        positive("width", width)?;
        positive("height", height)?;
        Ok(Self {
            focal,
            ox,
            oy,
            width,
            height,
        })
    }

    /// Intrinsics of the `res × res` crop used by the weak-perspective
    /// pipeline.
    pub fn weak_crop(res: f64) -> Self {
        Self {
            focal: WEAK_CROP_FOCAL,
            ox: res / 2.0,
            oy: res / 2.0,
            width: res,
            height: res,
        }
    }
}

/// Square person crop in full-resolution pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    pub cx: f64,
    pub cy: f64,
    /// Bounding-box side `b`.
    pub size: f64,
    #[serde(default = "default_res")]
    pub res: f64,
}

fn default_res() -> f64 {
    CROP_RESOLUTION
}

impl CropSpec {
    pub fn new(cx: f64, cy: f64, size: f64) -> Self {
        Self {
            cx,
            cy,
            size,
            res: CROP_RESOLUTION,
        }
    }

    /// `r = b / res`.
    pub fn resize_factor(&self) -> f64 {
        self.size / self.res
    }

    fn validate(&self) -> Result<(), CameraError> {
        positive("crop size", self.size)?;
        positive("crop resolution", self.res)?;
        Ok(())
    }
}

/// Crop-frame camera `(s, tx, ty)` as regressed by a weak-perspective network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakCameraParams {
    pub s: f64,
    pub tx: f64,
    pub ty: f64,
}

/// Translation added to model points before applying `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraTranslation(pub Vector3<f64>);

impl CameraTranslation {
    pub fn new(tx: f64, ty: f64, tz: f64) -> Self {
        Self(Vector3::new(tx, ty, tz))
    }
}

/// Focal length equal to the image diagonal (roughly a 55° diagonal FOV).
pub fn approx_focal(width: f64, height: f64) -> f64 {
    width.hypot(height)
}

pub fn focal_from_fov(width: f64, height: f64, fov_diag: f64) -> Result<f64, CameraError> {
    if !(fov_diag > 0.0 && fov_diag < std::f64::consts::PI) {
        return Err(CameraError::InvalidFov(fov_diag));
    }
    Ok(width.hypot(height) / (2.0 * (fov_diag / 2.0).tan()))
}

/// Depth from the crop scale: `tz = 2f / (r · res · s)`. With `r = 1` and a
/// crop-frame focal this is the weak-perspective depth.
pub fn tz_from_scale(focal: f64, r: f64, s: f64, res: f64) -> Result<f64, CameraError> {
    positive("focal", focal)?;
    positive("r", r)?;
    positive("s", s)?;
    positive("res", res)?;
    Ok(2.0 * focal / (r * res * s))
}

/// Offset of the crop center from the image center expressed in model
/// units at the subject's depth: `ĉ = 2(c − dim/2) / (s · b)`.
pub fn center_shift(crop: &CropSpec, s: f64, width: f64, height: f64) -> Result<(f64, f64), CameraError> {
    positive("s", s)?;
    crop.validate()?;
    let denom = s * crop.size;
    Ok((
        2.0 * (crop.cx - width / 2.0) / denom,
        2.0 * (crop.cy - height / 2.0) / denom,
    ))
}

/// Camera translation relative to the full-resolution camera center.
///
/// `T̂ = (tx + ĉx, ty + ĉy, tz)`: the crop-frame offsets are moved by the
/// crop's displacement from the principal point so the root lands at the
/// same image location as under the crop-frame camera.
pub fn full_translation(
    weak: &WeakCameraParams,
    crop: &CropSpec,
    focal: f64,
    width: f64,
    height: f64,
) -> Result<CameraTranslation, CameraError> {
    crop.validate()?;
    let tz = tz_from_scale(focal, crop.resize_factor(), weak.s, crop.res)?;
    let (shift_x, shift_y) = center_shift(crop, weak.s, width, height)?;
    Ok(CameraTranslation::new(weak.tx + shift_x, weak.ty + shift_y, tz))
}

/// Inverse of [`full_translation`].
pub fn weak_from_translation(
    t: &CameraTranslation,
    crop: &CropSpec,
    focal: f64,
    width: f64,
    height: f64,
) -> Result<WeakCameraParams, CameraError> {
    crop.validate()?;
    let tz = positive("tz", t.0.z)?;
    let s = 2.0 * focal / (crop.size * tz);
    let (shift_x, shift_y) = center_shift(crop, s, width, height)?;
    Ok(WeakCameraParams {
        s,
        tx: t.0.x - shift_x,
        ty: t.0.y - shift_y,
    })
}

/// Projects one point without the depth check.
#[inline]
pub fn project_point(p: &Vector3<f64>, k: &Intrinsics, t: &CameraTranslation) -> Vector2<f64> {
    let c = p + t.0;
    Vector2::new(k.focal * c.x / c.z + k.ox, k.focal * c.y / c.z + k.oy)
}

/// Pinhole projection of `points + T` onto the image plane of `k`.
pub fn project(
    points: &[Vector3<f64>],
    k: &Intrinsics,
    t: &CameraTranslation,
) -> Result<Vec<Vector2<f64>>, CameraError> {
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            let depth = p.z + t.0.z;
            if depth <= BEHIND_CAMERA_EPS {
                Err(CameraError::BehindCamera { index, depth })
            } else {
                Ok(project_point(p, k, t))
            }
        })
        .collect()
}

/// Inverse of [`project_point`] for a known camera-frame depth.
pub fn back_project(
    pixel: &Vector2<f64>,
    camera_depth: f64,
    k: &Intrinsics,
    t: &CameraTranslation,
) -> Vector3<f64> {
    let c = Vector3::new(
        (pixel.x - k.ox) * camera_depth / k.focal,
        (pixel.y - k.oy) * camera_depth / k.focal,
        camera_depth,
    );
    c - t.0
}

/// Translation used by the weak-perspective pipeline on the crop:
/// `(tx, ty, 2f / (res · s))` with the crop focal of `k_crop`.
pub fn weak_translation(k_crop: &Intrinsics, weak: &WeakCameraParams) -> Result<CameraTranslation, CameraError> {
    let tz = tz_from_scale(k_crop.focal, 1.0, weak.s, k_crop.width)?;
    Ok(CameraTranslation::new(weak.tx, weak.ty, tz))
}

/// Projection onto the `res × res` crop under the weak-perspective
/// convention (crop focal, depth from the scale alone).
pub fn project_weak(
    points: &[Vector3<f64>],
    k_crop: &Intrinsics,
    weak: &WeakCameraParams,
) -> Result<Vec<Vector2<f64>>, CameraError> {
    project(points, k_crop, &weak_translation(k_crop, weak)?)
}

/// Maps crop pixel coordinates to full-resolution image coordinates.
pub fn crop_to_image(p: &Vector2<f64>, crop: &CropSpec) -> Vector2<f64> {
    let r = crop.resize_factor();
    Vector2::new(
        crop.cx + (p.x - crop.res / 2.0) * r,
        crop.cy + (p.y - crop.res / 2.0) * r,
    )
}

/// Full-resolution intrinsics equivalent to projecting on the crop with the
/// weak-perspective focal and mapping back through [`crop_to_image`]:
/// focal `5000·r`, principal point at the crop center.
pub fn weak_equivalent_intrinsics(crop: &CropSpec, width: f64, height: f64) -> Intrinsics {
    Intrinsics {
        focal: WEAK_CROP_FOCAL * crop.resize_factor(),
        ox: crop.cx,
        oy: crop.cy,
        width,
        height,
    }
}

/// Scaled-orthographic projection: every point is divided by the root depth.
pub fn project_scaled_orthographic(
    points: &[Vector3<f64>],
    k: &Intrinsics,
    t: &CameraTranslation,
) -> Vec<Vector2<f64>> {
    let scale = k.focal / t.0.z;
    points
        .iter()
        .map(|p| {
            let c = p + t.0;
            Vector2::new(scale * c.x + k.ox, scale * c.y + k.oy)
        })
        .collect()
}
