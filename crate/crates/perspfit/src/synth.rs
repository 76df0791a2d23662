//! Synthetic scenes with exact ground truth.
//!
//! A subject facing the camera is posed, placed and projected with a known
//! pinhole camera; keypoints get pixel noise, and the initialization is the
//! true pose and translation with added noise, encoded as the crop-frame
//! camera a regression network would output.

use std::f64::consts::PI;

use nalgebra::Vector3;
use perspfit_core::body::{forward_kinematics, JointMapping, KinematicTree, PoseParams, NUM_POSE_PARAMS};
use perspfit_core::camera::{approx_focal, project, weak_from_translation, CameraTranslation, Intrinsics};
use perspfit_core::fitting::{FrameObservation, JointLimits, Keypoint2D};
use perspfit_core::geometry::{matrix_to_axis_angle, RotationMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::io::{derive_crop, SkeletonFrame, SequenceInput};

/// Closest a joint may come to the camera plane, meters.
pub const MIN_JOINT_DEPTH: f64 = 0.5;
const MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MotionModel {
    /// Every frame is an independent scene.
    #[default]
    Independent,
    /// One subject moving smoothly: every pose parameter oscillates about a
    /// base pose and the subject walks sideways.
    Smooth {
        fps: f64,
        /// Pose oscillation amplitude, radians.
        amplitude: f64,
        frequency_hz: f64,
        /// Sideways walking speed, m/s.
        speed: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSceneSpec {
    pub frames: usize,
    /// `[W, H]` in pixels.
    pub image_size: [f64; 2],
    /// True focal length; the image diagonal when absent.
    pub focal: Option<f64>,
    /// Root depth range, meters.
    pub distance_range: [f64; 2],
    /// Root image position offset from the image center, as a fraction of
    /// the half image extent, drawn uniformly from this range per axis with
    /// a random sign.
    pub center_offset_range: [f64; 2],
    /// Spread of the true body pose parameters, radians.
    pub truth_pose_sigma: f64,
    /// Maximum turn of the subject away from facing the camera, radians.
    pub yaw_range: f64,
    /// Initialization noise on every pose parameter, radians.
    pub pose_sigma: f64,
    /// Initialization noise on the camera translation, relative to its norm.
    pub translation_noise: f64,
    /// Keypoint noise, pixels.
    pub keypoint_sigma: f64,
    pub confidence_range: [f64; 2],
    /// Probability that a keypoint is missed (confidence 0).
    pub dropout: f64,
    /// Require every keypoint inside the image.
    pub keep_in_frame: bool,
    pub motion: MotionModel,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        Self {
            frames: 50,
            image_size: [1080.0, 1920.0],
            focal: None,
            distance_range: [2.0, 8.0],
            center_offset_range: [0.0, 0.3],
            truth_pose_sigma: 0.3,
            yaw_range: 0.6,
            pose_sigma: 0.1,
            translation_noise: 0.1,
            keypoint_sigma: 2.0,
            confidence_range: [0.7, 1.0],
            dropout: 0.0,
            keep_in_frame: true,
            motion: MotionModel::Independent,
            seed: 0,
        }
    }
}

impl SyntheticSceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PipelineError::Config(format!("synthetic: {m}")));
        let [w, h] = self.image_size;
        if !(w > 0.0 && h > 0.0) {
            return bad("image size must be positive");
        }
        if self.focal.is_some_and(|f| !(f > 0.0)) {
            return bad("focal must be positive");
        }
        let [d0, d1] = self.distance_range;
        if !(d0 > 0.0 && d1 >= d0) {
            return bad("distance range must be positive and ordered");
        }
        let [o0, o1] = self.center_offset_range;
        if !(0.0 <= o0 && o0 <= o1 && o1 < 1.0) {
            return bad("center offsets must satisfy 0 <= min <= max < 1");
        }
        for (name, v) in [
            ("truth_pose_sigma", self.truth_pose_sigma),
            ("yaw_range", self.yaw_range),
            ("pose_sigma", self.pose_sigma),
            ("translation_noise", self.translation_noise),
            ("keypoint_sigma", self.keypoint_sigma),
        ] {
            if !(v >= 0.0) {
                return Err(PipelineError::Config(format!("synthetic: {name} must be non-negative")));
            }
        }
        let [c0, c1] = self.confidence_range;
        if !(0.0 < c0 && c0 <= c1 && c1 <= 1.0) {
            return bad("confidence range must lie in (0, 1] and be ordered");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if let MotionModel::Smooth { fps, amplitude, frequency_hz, speed } = self.motion {
            if !(fps > 0.0) || !(amplitude >= 0.0) || !(frequency_hz >= 0.0) || !speed.is_finite() {
                return bad("motion parameters must be positive");
            }
        }
        Ok(())
    }

    pub fn true_focal(&self) -> f64 {
        self.focal.unwrap_or_else(|| approx_focal(self.image_size[0], self.image_size[1]))
    }

    pub fn intrinsics(&self) -> Intrinsics {
        let [w, h] = self.image_size;
        Intrinsics::centered(self.true_focal(), w, h).expect("validated image size and focal")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFrame {
    pub pose: PoseParams,
    pub translation: CameraTranslation,
    /// Initialization translation before its crop-frame encoding.
    pub init_translation: CameraTranslation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub sequence: SequenceInput,
    pub truth: Vec<TruthFrame>,
    pub intrinsics: Intrinsics,
}

/// Orientation of a subject facing the camera, turned by `yaw` about its
/// vertical axis.
pub fn facing_camera(yaw: f64) -> RotationMatrix {
    RotationMatrix::rot_x(PI) * RotationMatrix::rot_y(yaw)
}

fn sample_body_pose(rng: &mut impl Rng, sigma: f64, yaw: f64) -> PoseParams {
    let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
    let values: Vec<f64> = (0..NUM_POSE_PARAMS).map(|_| if sigma > 0.0 { normal.sample(rng) } else { 0.0 }).collect();
    let mut pose = PoseParams::from_vec(values).unwrap();
    clamp_to_limits(&mut pose);
    pose.set_joint(0, matrix_to_axis_angle(&facing_camera(yaw)));
    pose
}

fn clamp_to_limits(pose: &mut PoseParams) {
    let limits = JointLimits::default();
    for (i, v) in pose.as_mut_slice().iter_mut().enumerate().skip(3) {
        let (lo, hi) = limits.bounds(i);
        *v = v.clamp(lo, hi);
    }
}

fn sample_offset(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    let magnitude = if range[1] > range[0] { rng.random_range(range[0]..=range[1]) } else { range[0] };
    if rng.random_bool(0.5) {
        magnitude
    } else {
        -magnitude
    }
}

/// Translation that puts the root at depth `tz` and at the image point
/// offset from the principal point by `(du, dv)` half-extents.
fn place_root(k: &Intrinsics, tz: f64, du: f64, dv: f64) -> CameraTranslation {
    let u = du * k.width / 2.0;
    let v = dv * k.height / 2.0;
    CameraTranslation::new(u * tz / k.focal, v * tz / k.focal, tz)
}

struct Generator<'a> {
    spec: &'a SyntheticSceneSpec,
    tree: &'a KinematicTree,
    mapping: &'a JointMapping,
    k: Intrinsics,
}

impl Generator<'_> {
    /// Exact projections of the observation joints, or `None` when the pose
    /// violates the depth or framing constraints.
    fn project_truth(&self, pose: &PoseParams, t: &CameraTranslation) -> Option<(Vec<nalgebra::Vector2<f64>>, SkeletonFrame)> {
        let skel = forward_kinematics(self.tree, pose);
        if skel.joints3d.iter().any(|p| p.z + t.0.z < MIN_JOINT_DEPTH) {
            return None;
        }
        let observed = self.mapping.apply(&skel.joints3d);
        let pixels = project(&observed, &self.k, t).ok()?;
        if self.spec.keep_in_frame && pixels.iter().any(|p| p.x < 0.0 || p.y < 0.0 || p.x > self.k.width || p.y > self.k.height) {
            return None;
        }
        let camera_joints: Vec<Vector3<f64>> = skel.joints3d.iter().map(|p| p + t.0).collect();
        Some((pixels, SkeletonFrame::from_skeleton(0, &camera_joints, &skel.parts)))
    }

    fn observe(
        &self,
        rng: &mut impl Rng,
        index: usize,
        timestamp: f64,
        pose: &PoseParams,
        t: &CameraTranslation,
    ) -> Result<Option<(FrameObservation, SkeletonFrame, TruthFrame)>> {
        let Some((pixels, mut gt)) = self.project_truth(pose, t) else {
            return Ok(None);
        };
        gt.frame_index = index as u64;
        let spec = self.spec;
        let [c0, c1] = spec.confidence_range;
        let keypoints: Vec<Keypoint2D> = pixels
            .iter()
            .map(|p| {
                let (nx, ny): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                let confidence = if rng.random_bool(spec.dropout) {
                    0.0
                } else if c1 > c0 {
                    rng.random_range(c0..=c1)
                } else {
                    c0
                };
                Keypoint2D::new(p.x + spec.keypoint_sigma * nx, p.y + spec.keypoint_sigma * ny, confidence)
            })
            .collect();
        let Ok(crop) = derive_crop(&keypoints, (self.k.width, self.k.height)) else {
            return Ok(None);
        };

        let mut init_pose = pose.clone();
        if spec.pose_sigma > 0.0 {
            for v in init_pose.as_mut_slice() {
                let n: f64 = rng.sample(StandardNormal);
                *v += spec.pose_sigma * n;
            }
        }
        let g = Vector3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let init_translation = CameraTranslation(t.0 + g * (spec.translation_noise * t.0.norm() / 3f64.sqrt()));
        if init_translation.0.z < MIN_JOINT_DEPTH {
            return Ok(None);
        }
        let init_cam = weak_from_translation(&init_translation, &crop, self.k.focal, self.k.width, self.k.height)?;
        let obs = FrameObservation {
            keypoints,
            image_size: (self.k.width, self.k.height),
            crop,
            init_pose,
            init_cam,
            frame_index: index as u64,
            timestamp,
        };
        let truth = TruthFrame {
            pose: pose.clone(),
            translation: *t,
            init_translation,
        };
        Ok(Some((obs, gt, truth)))
    }

    fn independent(&self, rng: &mut ChaCha8Rng) -> Result<Vec<(FrameObservation, SkeletonFrame, TruthFrame)>> {
        let spec = self.spec;
        let rate = 30.0;
        (0..spec.frames)
            .map(|index| {
                for _ in 0..MAX_ATTEMPTS {
                    let yaw = rng.random_range(-spec.yaw_range..=spec.yaw_range);
                    let pose = sample_body_pose(rng, spec.truth_pose_sigma, yaw);
                    let [d0, d1] = spec.distance_range;
                    let tz = if d1 > d0 { rng.random_range(d0..=d1) } else { d0 };
                    let du = sample_offset(rng, spec.center_offset_range);
                    let dv = sample_offset(rng, spec.center_offset_range);
                    let t = place_root(&self.k, tz, du, dv);
                    if let Some(frame) = self.observe(rng, index, index as f64 / rate, &pose, &t)? {
                        return Ok(frame);
                    }
                }
                Err(PipelineError::Synthetic(format!(
                    "no valid scene for frame {index} after {MAX_ATTEMPTS} attempts; widen the distance or offset ranges"
                )))
            })
            .collect()
    }

    fn smooth(
        &self,
        rng: &mut ChaCha8Rng,
        fps: f64,
        amplitude: f64,
        frequency_hz: f64,
        speed: f64,
    ) -> Result<Vec<(FrameObservation, SkeletonFrame, TruthFrame)>> {
        let spec = self.spec;
        'attempt: for _ in 0..MAX_ATTEMPTS {
            let yaw = rng.random_range(-spec.yaw_range..=spec.yaw_range);
            let base = sample_body_pose(rng, spec.truth_pose_sigma, yaw);
            let phases: Vec<f64> = (0..NUM_POSE_PARAMS).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let [d0, d1] = spec.distance_range;
            let tz = if d1 > d0 { rng.random_range(d0..=d1) } else { d0 };
            let start = place_root(&self.k, tz, sample_offset(rng, spec.center_offset_range), sample_offset(rng, spec.center_offset_range));
            let mut frames = Vec::with_capacity(spec.frames);
            for index in 0..spec.frames {
                let time = index as f64 / fps;
                let mut pose = base.clone();
                for (i, v) in pose.as_mut_slice().iter_mut().enumerate().skip(3) {
                    *v += amplitude * (2.0 * PI * frequency_hz * time + phases[i]).sin();
                }
                clamp_to_limits(&mut pose);
                let t = CameraTranslation(start.0 + Vector3::new(speed * time, 0.0, 0.0));
                match self.observe(rng, index, time, &pose, &t)? {
                    Some(frame) => frames.push(frame),
                    None => continue 'attempt,
                }
            }
            return Ok(frames);
        }
        Err(PipelineError::Synthetic(format!(
            "no valid sequence after {MAX_ATTEMPTS} attempts; the subject leaves the frame or comes too close"
        )))
    }
}

pub fn generate_synthetic(spec: &SyntheticSceneSpec, tree: &KinematicTree, mapping: &JointMapping) -> Result<SyntheticScene> {
    spec.validate()?;
    let k = spec.intrinsics();
    let generator = Generator { spec, tree, mapping, k };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let frames = match spec.motion {
        MotionModel::Independent => generator.independent(&mut rng)?,
        MotionModel::Smooth {
            fps,
            amplitude,
            frequency_hz,
            speed,
        } => generator.smooth(&mut rng, fps, amplitude, frequency_hz, speed)?,
    };
    let mut observations = Vec::with_capacity(frames.len());
    let mut gt = Vec::with_capacity(frames.len());
    let mut truth = Vec::with_capacity(frames.len());
    for (o, g, t) in frames {
        observations.push(o);
        gt.push(g);
        truth.push(t);
    }
    Ok(SyntheticScene {
        sequence: SequenceInput {
            source: format!("synthetic(seed={})", spec.seed),
            image_size: (k.width, k.height),
            frames: observations,
            ground_truth: Some(gt),
        },
        truth,
        intrinsics: k,
    })
}
