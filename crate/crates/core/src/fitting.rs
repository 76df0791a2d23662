//! Two-stage fitting of the body to 2D keypoints.
//!
//! Stage 1 optimizes the global orientation and camera translation with the
//! body pose frozen; stage 2 optimizes the 69 body-pose parameters with the
//! camera and global orientation frozen. Both stages minimize the same
//! objective: confidence²-weighted reprojection error, a quadratic pull of
//! the body pose towards its initialization and hinge joint-limit penalties.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body::{
    forward_kinematics, pose_gradient, BodyError, JointMapping, KinematicTree, PoseParams,
    NUM_OBSERVATION_JOINTS, NUM_POSE_PARAMS,
};
use crate::camera::{
    approx_focal, full_translation, project_point, tz_from_scale, weak_equivalent_intrinsics, CameraError,
    CameraTranslation, CropSpec, Intrinsics, WeakCameraParams,
};
use crate::geometry::AxisAngle;

/// Camera-frame depth below which a joint incurs the barrier penalty.
pub const BARRIER_DEPTH: f64 = 1e-2;
/// Barrier magnitude at the threshold, px².
pub const BARRIER_SCALE: f64 = 1e10;

/// BODY_25 indices of the shoulders and hips.
pub const TORSO_JOINTS: [usize; 4] = [2, 5, 9, 12];

#[derive(Debug, Error)]
pub enum FitError {
    #[error("every keypoint has zero confidence; the loss is undefined")]
    UndefinedLoss,
    #[error("observation has {0} keypoints, expected {NUM_OBSERVATION_JOINTS}")]
    KeypointCount(usize),
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Body(#[from] BodyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint2D {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint2D {
    pub fn new(x: f64, y: f64, confidence: f64) -> Self {
        Self { x, y, confidence }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// One frame's detector keypoints plus the network's initial estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    pub keypoints: Vec<Keypoint2D>,
    /// `(W, H)` in pixels.
    pub image_size: (f64, f64),
    pub crop: CropSpec,
    pub init_pose: PoseParams,
    pub init_cam: WeakCameraParams,
    pub frame_index: u64,
    pub timestamp: f64,
}

impl FrameObservation {
    pub fn has_confident_keypoint(&self) -> bool {
        self.keypoints.iter().any(|k| k.confidence > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CameraCenterMode {
    /// Principal point at the image center with the corrected translation.
    #[default]
    ImageCenter,
    /// Principal point at the crop center with the crop-frame translation.
    BboxCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    #[default]
    Full,
    /// Crop-frame projection with the fixed 5000 px crop focal.
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Squared,
    /// `ρ(r) = σ²r² / (σ² + r²)` on the pixel residual norm `r`.
    GemanMcclure { sigma: f64 },
}

impl LossKind {
    /// `(ρ, dρ/d(r²))` for a squared residual norm.
    fn robustify(&self, r2: f64) -> (f64, f64) {
        match *self {
            LossKind::Squared => (r2, 1.0),
            LossKind::GemanMcclure { sigma } => {
                let s2 = sigma * sigma;
                let denom = s2 + r2;
                (s2 * r2 / denom, s2 * s2 / (denom * denom))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Iterations per stage.
    pub iterations: usize,
    pub learning_rate: f64,
    /// Focal length in pixels; the image diagonal when absent.
    pub focal_override: Option<f64>,
    /// Principal point in pixels; the image center when absent.
    pub principal_point: Option<[f64; 2]>,
    /// Stage 1 uses all 25 joints; otherwise only shoulders and hips.
    pub stage1_use_all_joints: bool,
    /// Weight of `‖θ − θ̄‖²` over all 72 pose parameters, px²/rad², where
    /// `θ̄` is the initialization clamped into the joint limits.
    pub pose_prior_weight: f64,
    /// Weight of the squared joint-limit violations, px²/rad².
    pub joint_limit_weight: f64,
    pub camera_center_mode: CameraCenterMode,
    pub projection: ProjectionMode,
    pub loss_kind: LossKind,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            learning_rate: 0.01,
            focal_override: None,
            principal_point: None,
            stage1_use_all_joints: true,
            pose_prior_weight: 2e4,
            joint_limit_weight: 1e6,
            camera_center_mode: CameraCenterMode::ImageCenter,
            projection: ProjectionMode::Full,
            loss_kind: LossKind::Squared,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let bad = |m: &str| Err(FitError::InvalidConfig(m.into()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.focal_override.is_some_and(|f| !(f > 0.0)) {
            return bad("focal_override must be positive");
        }
        if !(self.pose_prior_weight >= 0.0) || !(self.joint_limit_weight >= 0.0) {
            return bad("prior weights must be non-negative");
        }
        if let LossKind::GemanMcclure { sigma } = self.loss_kind {
            if !(sigma > 0.0) {
                return bad("Geman-McClure sigma must be positive");
            }
        }
        Ok(())
    }
}

/// Intrinsics used for fitting and the initial camera translation decoded
/// from the crop-frame parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSetup {
    pub intrinsics: Intrinsics,
    pub init_translation: CameraTranslation,
}

pub fn camera_setup(obs: &FrameObservation, cfg: &FitConfig) -> Result<CameraSetup, FitError> {
    let (width, height) = obs.image_size;
    let crop = &obs.crop;
    let weak = &obs.init_cam;
    match cfg.projection {
        ProjectionMode::Weak => {
            let intrinsics = weak_equivalent_intrinsics(crop, width, height);
            let tz = tz_from_scale(intrinsics.focal, crop.resize_factor(), weak.s, crop.res)?;
            Ok(CameraSetup {
                intrinsics,
                init_translation: CameraTranslation::new(weak.tx, weak.ty, tz),
            })
        }
        ProjectionMode::Full => {
            let focal = cfg.focal_override.unwrap_or_else(|| approx_focal(width, height));
            match cfg.camera_center_mode {
                CameraCenterMode::ImageCenter => {
                    let [ox, oy] = cfg.principal_point.unwrap_or([width / 2.0, height / 2.0]);
                    let intrinsics = Intrinsics::new(focal, ox, oy, width, height)?;
                    // The shift is measured from the principal point, which
                    // the conversion takes as half the given extent.
                    let init_translation = full_translation(weak, crop, focal, 2.0 * ox, 2.0 * oy)?;
                    Ok(CameraSetup {
                        intrinsics,
                        init_translation,
                    })
                }
                CameraCenterMode::BboxCenter => {
                    let intrinsics = Intrinsics::new(focal, crop.cx, crop.cy, width, height)?;
                    let tz = tz_from_scale(focal, crop.resize_factor(), weak.s, crop.res)?;
                    Ok(CameraSetup {
                        intrinsics,
                        init_translation: CameraTranslation::new(weak.tx, weak.ty, tz),
                    })
                }
            }
        }
    }
}

/// Reprojection loss with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    /// `∂L/∂pⱼ` for the 25 observation-joint positions.
    pub joint_grads: Vec<Vector3<f64>>,
    pub translation_grad: Vector3<f64>,
}

/// `Σⱼ cⱼ² · ρ(‖π(pⱼ + T) − kⱼ‖)` with exact gradients through the pinhole
/// division. Joints closer than [`BARRIER_DEPTH`] to the camera plane get a
/// large penalty whose gradient pushes them away from the camera.
pub fn reprojection_loss(
    joints3d: &[Vector3<f64>],
    t: &CameraTranslation,
    k: &Intrinsics,
    obs: &[Keypoint2D],
    loss_kind: LossKind,
) -> Result<LossEval, FitError> {
    if obs.len() != joints3d.len() {
        return Err(FitError::KeypointCount(obs.len()));
    }
    if !obs.iter().any(|kp| kp.confidence > 0.0) {
        return Err(FitError::UndefinedLoss);
    }
    let mut value = 0.0;
    let mut joint_grads = vec![Vector3::zeros(); joints3d.len()];
    let mut translation_grad = Vector3::zeros();
    for ((p, kp), grad) in joints3d.iter().zip(obs).zip(joint_grads.iter_mut()) {
        if kp.confidence <= 0.0 {
            continue;
        }
        let weight = kp.confidence * kp.confidence;
        let q = p + t.0;
        let g = if q.z < BARRIER_DEPTH {
            let excess = 1.0 + (BARRIER_DEPTH - q.z) / BARRIER_DEPTH;
            value += weight * BARRIER_SCALE * excess * excess;
            Vector3::new(0.0, 0.0, -2.0 * weight * BARRIER_SCALE * excess / BARRIER_DEPTH)
        } else {
            let inv_z = 1.0 / q.z;
            let u = k.focal * q.x * inv_z + k.ox;
            let v = k.focal * q.y * inv_z + k.oy;
            let (eu, ev) = (u - kp.x, v - kp.y);
            let (rho, drho) = loss_kind.robustify(eu * eu + ev * ev);
            value += weight * rho;
            let (gu, gv) = (2.0 * weight * drho * eu, 2.0 * weight * drho * ev);
            let fz = k.focal * inv_z;
            Vector3::new(fz * gu, fz * gv, -fz * inv_z * (gu * q.x + gv * q.y))
        };
        *grad = g;
        translation_grad += g;
    }
    Ok(LossEval {
        value,
        joint_grads,
        translation_grad,
    })
}

/// Per-parameter pose bounds, radians.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLimits {
    bounds: Vec<(f64, f64)>,
}

impl Default for JointLimits {
    /// One-sided knee and elbow flexion, ±2.6 rad for the remaining body
    /// parameters, the global orientation unconstrained.
    fn default() -> Self {
        const GENERIC: f64 = 2.6;
        let mut bounds = vec![(-GENERIC, GENERIC); NUM_POSE_PARAMS];
        for b in &mut bounds[..3] {
            *b = (f64::NEG_INFINITY, f64::INFINITY);
        }
        bounds[3 * 4] = (0.0, GENERIC); // left knee, x
        bounds[3 * 5] = (0.0, GENERIC); // right knee, x
        bounds[3 * 18 + 1] = (-GENERIC, 0.0); // left elbow, y
        bounds[3 * 19 + 1] = (0.0, GENERIC); // right elbow, y
        Self { bounds }
    }
}

impl JointLimits {
    pub fn bounds(&self, param: usize) -> (f64, f64) {
        self.bounds[param]
    }

    /// Nearest pose inside the bounds.
    pub fn project(&self, pose: &PoseParams) -> PoseParams {
        let mut out = pose.clone();
        for (v, (lo, hi)) in out.as_mut_slice().iter_mut().zip(&self.bounds) {
            *v = v.clamp(*lo, *hi);
        }
        out
    }

    pub fn satisfied(&self, pose: &PoseParams) -> bool {
        pose.as_slice()
            .iter()
            .zip(&self.bounds)
            .all(|(v, (lo, hi))| (*lo..=*hi).contains(v))
    }

    /// `Σ max(0, θ − hi)² + max(0, lo − θ)²` and its gradient.
    pub fn penalty(&self, pose: &PoseParams) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; NUM_POSE_PARAMS];
        for ((v, (lo, hi)), g) in pose.as_slice().iter().zip(&self.bounds).zip(grad.iter_mut()) {
            let excess = if v > hi {
                v - hi
            } else if v < lo {
                v - lo
            } else {
                0.0
            };
            value += excess * excess;
            *g = 2.0 * excess;
        }
        (value, grad)
    }
}

/// Value and gradient of the full per-frame objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub reprojection: f64,
    pub pose_grad: Vec<f64>,
    pub translation_grad: Vector3<f64>,
}

/// The per-frame objective over `(θ, T)` for a fixed camera and set of
/// keypoints.
pub struct FrameObjective<'a> {
    pub tree: &'a KinematicTree,
    pub mapping: &'a JointMapping,
    pub intrinsics: Intrinsics,
    pub keypoints: &'a [Keypoint2D],
    /// Pose the quadratic prior pulls towards.
    pub prior_mean: PoseParams,
    pub limits: JointLimits,
    pub pose_prior_weight: f64,
    pub joint_limit_weight: f64,
    pub loss_kind: LossKind,
}

impl FrameObjective<'_> {
    pub fn evaluate(&self, pose: &PoseParams, t: &CameraTranslation) -> Result<ObjectiveEval, FitError> {
        self.evaluate_with(pose, t, self.keypoints)
    }

    fn evaluate_with(
        &self,
        pose: &PoseParams,
        t: &CameraTranslation,
        keypoints: &[Keypoint2D],
    ) -> Result<ObjectiveEval, FitError> {
        let skel = forward_kinematics(self.tree, pose);
        let observed = self.mapping.apply(&skel.joints3d);
        let loss = reprojection_loss(&observed, t, &self.intrinsics, keypoints, self.loss_kind)?;
        let model_grads = self.mapping.apply_transpose(&loss.joint_grads);
        let mut pose_grad = pose_gradient(self.tree, pose, &skel, &model_grads);

        let mut value = loss.value;
        if self.pose_prior_weight > 0.0 {
            for i in 0..NUM_POSE_PARAMS {
                let d = pose.as_slice()[i] - self.prior_mean.as_slice()[i];
                value += self.pose_prior_weight * d * d;
                pose_grad[i] += 2.0 * self.pose_prior_weight * d;
            }
        }
        if self.joint_limit_weight > 0.0 {
            let (penalty, grad) = self.limits.penalty(pose);
            value += self.joint_limit_weight * penalty;
            for (pg, g) in pose_grad.iter_mut().zip(grad) {
                *pg += self.joint_limit_weight * g;
            }
        }
        Ok(ObjectiveEval {
            value,
            reprojection: loss.value,
            pose_grad,
            translation_grad: loss.translation_grad,
        })
    }
}

/// Adam with accept-if-improved stepping: a step that raises the objective
/// is halved up to [`MAX_HALVINGS`] times and dropped if none improves.
pub const MAX_HALVINGS: usize = 5;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub initial: f64,
    pub trace: Vec<f64>,
    pub converged: bool,
}

pub fn minimize<F>(mut f: F, x0: Vec<f64>, iterations: usize, lr: f64) -> Result<MinimizeOutcome, FitError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), FitError>,
{
    let mut x = x0;
    let (mut value, mut grad) = f(&x)?;
    let initial = value;
    let n = x.len();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut trace = Vec::with_capacity(iterations);
    let mut candidate = vec![0.0; n];
    for it in 1..=iterations {
        let bias1 = 1.0 - ADAM_BETA1.powi(it as i32);
        let bias2 = 1.0 - ADAM_BETA2.powi(it as i32);
        let step: Vec<f64> = (0..n)
            .map(|i| {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * grad[i];
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
                -lr * (m[i] / bias1) / ((v[i] / bias2).sqrt() + ADAM_EPS)
            })
            .collect();
        let mut scale = 1.0;
        for _ in 0..=MAX_HALVINGS {
            for i in 0..n {
                candidate[i] = x[i] + scale * step[i];
            }
            let (cv, cg) = f(&candidate)?;
            if cv <= value {
                x.copy_from_slice(&candidate);
                value = cv;
                grad = cg;
                break;
            }
            scale *= 0.5;
        }
        trace.push(value);
    }
    let window = trace.len().min(10);
    let reference = if trace.len() > window {
        trace[trace.len() - 1 - window]
    } else {
        initial
    };
    let converged = value < 1e-12 || (reference - value) <= 1e-6 * reference.abs();
    Ok(MinimizeOutcome {
        x,
        initial,
        trace,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Output {
    pub global_orientation: AxisAngle,
    pub translation: CameraTranslation,
    pub intrinsics: Intrinsics,
    pub initial_loss: f64,
    pub loss_trace: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergedFlags {
    pub camera: bool,
    pub pose: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub pose: PoseParams,
    pub camera_translation: CameraTranslation,
    pub intrinsics: Intrinsics,
    /// Observation joints projected with the fitted camera, pixels.
    pub projected: Vec<Vector2<f64>>,
    /// Objective after each iteration of stage 1 then stage 2.
    pub loss_trace: Vec<f64>,
    /// Full objective at the initialization.
    pub initial_loss: f64,
    pub final_loss: f64,
    pub converged: ConvergedFlags,
}

fn check_observation(obs: &FrameObservation) -> Result<(), FitError> {
    if obs.keypoints.len() != NUM_OBSERVATION_JOINTS {
        return Err(FitError::KeypointCount(obs.keypoints.len()));
    }
    if !obs.has_confident_keypoint() {
        return Err(FitError::UndefinedLoss);
    }
    Ok(())
}

fn objective<'a>(
    obs: &'a FrameObservation,
    tree: &'a KinematicTree,
    mapping: &'a JointMapping,
    cfg: &FitConfig,
    intrinsics: Intrinsics,
) -> FrameObjective<'a> {
    let limits = JointLimits::default();
    FrameObjective {
        tree,
        mapping,
        intrinsics,
        keypoints: &obs.keypoints,
        prior_mean: limits.project(&obs.init_pose),
        limits,
        pose_prior_weight: cfg.pose_prior_weight,
        joint_limit_weight: cfg.joint_limit_weight,
        loss_kind: cfg.loss_kind,
    }
}

fn torso_only(keypoints: &[Keypoint2D]) -> Vec<Keypoint2D> {
    keypoints
        .iter()
        .enumerate()
        .map(|(i, kp)| {
            if TORSO_JOINTS.contains(&i) {
                *kp
            } else {
                Keypoint2D { confidence: 0.0, ..*kp }
            }
        })
        .collect()
}

/// Stage 1: global orientation and camera translation, body pose frozen at
/// its initialization.
pub fn fit_camera_and_orientation(
    obs: &FrameObservation,
    tree: &KinematicTree,
    mapping: &JointMapping,
    cfg: &FitConfig,
) -> Result<Stage1Output, FitError> {
    cfg.validate()?;
    check_observation(obs)?;
    let setup = camera_setup(obs, cfg)?;
    let objective = objective(obs, tree, mapping, cfg, setup.intrinsics);
    let keypoints = if cfg.stage1_use_all_joints {
        obs.keypoints.clone()
    } else {
        torso_only(&obs.keypoints)
    };
    if !keypoints.iter().any(|k| k.confidence > 0.0) {
        return Err(FitError::UndefinedLoss);
    }

    // Translation is optimized as (x/z, y/z, ln z/z₀): image position and
    // scale move independently, and a step changes depth by the same
    // fraction at any range.
    let t0 = setup.init_translation.0;
    let translation = |x: &[f64]| {
        let z = t0.z * x[5].exp();
        CameraTranslation::new(x[3] * z, x[4] * z, z)
    };
    let mut pose = obs.init_pose.clone();
    let mut x0 = pose.as_slice()[..3].to_vec();
    x0.extend([t0.x / t0.z, t0.y / t0.z, 0.0]);
    let outcome = minimize(
        |x| {
            pose.as_mut_slice()[..3].copy_from_slice(&x[..3]);
            let t = translation(x);
            let e = objective.evaluate_with(&pose, &t, &keypoints)?;
            let (g, z) = (e.translation_grad, t.0.z);
            let mut grad = e.pose_grad[..3].to_vec();
            grad.extend([g.x * z, g.y * z, (g.x * x[3] + g.y * x[4] + g.z) * z]);
            Ok((e.value, grad))
        },
        x0,
        cfg.iterations,
        cfg.learning_rate,
    )?;
    let x = &outcome.x;
    Ok(Stage1Output {
        global_orientation: AxisAngle::new(x[0], x[1], x[2]),
        translation: translation(x),
        intrinsics: setup.intrinsics,
        initial_loss: outcome.initial,
        loss_trace: outcome.trace,
        converged: outcome.converged,
    })
}

/// Stage 2: all 72 pose parameters, starting from the stage-1 global
/// orientation, with the camera translation frozen at its stage-1 value.
pub fn fit_pose(
    obs: &FrameObservation,
    tree: &KinematicTree,
    mapping: &JointMapping,
    stage1: &Stage1Output,
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    cfg.validate()?;
    check_observation(obs)?;
    let objective = objective(obs, tree, mapping, cfg, stage1.intrinsics);
    let t = stage1.translation;
    let mut pose = obs.init_pose.clone();
    pose.set_joint(0, stage1.global_orientation);

    let x0 = pose.as_slice().to_vec();
    let outcome = minimize(
        |x| {
            pose.as_mut_slice().copy_from_slice(x);
            let e = objective.evaluate(&pose, &t)?;
            Ok((e.value, e.pose_grad))
        },
        x0,
        cfg.iterations,
        cfg.learning_rate,
    )?;
    pose.as_mut_slice().copy_from_slice(&outcome.x);

    let skel = forward_kinematics(tree, &pose);
    let projected = mapping
        .apply(&skel.joints3d)
        .iter()
        .map(|p| project_point(p, &stage1.intrinsics, &t))
        .collect();
    let final_loss = outcome.trace.last().copied().unwrap_or(outcome.initial);
    let mut loss_trace = stage1.loss_trace.clone();
    loss_trace.extend(outcome.trace);
    Ok(FitResult {
        pose: pose.canonicalized(),
        camera_translation: t,
        intrinsics: stage1.intrinsics,
        projected,
        loss_trace,
        initial_loss: stage1.initial_loss,
        final_loss,
        converged: ConvergedFlags {
            camera: stage1.converged,
            pose: outcome.converged,
        },
    })
}

/// Stage 1 followed by stage 2.
pub fn fit_frame(
    obs: &FrameObservation,
    tree: &KinematicTree,
    mapping: &JointMapping,
    cfg: &FitConfig,
) -> Result<FitResult, FitError> {
    let stage1 = fit_camera_and_orientation(obs, tree, mapping, cfg)?;
    fit_pose(obs, tree, mapping, &stage1, cfg)
}

/// Full objective of `obs` at its initialization under `cfg`.
pub fn initial_objective(
    obs: &FrameObservation,
    tree: &KinematicTree,
    mapping: &JointMapping,
    cfg: &FitConfig,
) -> Result<f64, FitError> {
    check_observation(obs)?;
    let setup = camera_setup(obs, cfg)?;
    Ok(objective(obs, tree, mapping, cfg, setup.intrinsics)
        .evaluate(&obs.init_pose, &setup.init_translation)?
        .value)
}
