//! Input and output file formats.
//!
//! - Keypoints: one OpenPose-style JSON document per frame, with
//!   `people[].pose_keypoints_2d` holding 75 numbers, `(x, y, confidence)`
//!   for each BODY_25 joint in pixels.
//! - Initialization sidecar: per-frame pose parameters (72, radians) and
//!   crop-frame camera `[s, tx, ty]`.
//! - Ground truth: per-frame 24 joint positions in meters and the 9 part
//!   orientations as row-major 3×3 matrices, both in camera coordinates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector2, Vector3};
use perspfit_core::body::{PartOrientations, PoseParams, NUM_JOINTS, NUM_OBSERVATION_JOINTS};
use perspfit_core::camera::{CropSpec, WeakCameraParams, CROP_RESOLUTION};
use perspfit_core::fitting::{FrameObservation, Keypoint2D};
use perspfit_core::geometry::{RotationMatrix, EXTERNAL_ROTATION_TOLERANCE};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::TrackingPolicy;
use crate::error::{PipelineError, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const CROP_MARGIN: f64 = 1.2;
pub const CROP_MIN_SIDE: f64 = 64.0;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::parse(path, None, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::parse(path, None, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let io = |source| PipelineError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, text).map_err(io)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenPosePerson {
    #[serde(default)]
    pub person_id: Vec<i64>,
    pub pose_keypoints_2d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenPoseDocument {
    #[serde(default)]
    pub version: f64,
    pub people: Vec<OpenPosePerson>,
}

impl OpenPoseDocument {
    pub fn single(keypoints: &[Keypoint2D]) -> Self {
        Self {
            version: 1.3,
            people: vec![OpenPosePerson {
                person_id: vec![-1],
                pose_keypoints_2d: keypoints.iter().flat_map(|k| [k.x, k.y, k.confidence]).collect(),
            }],
        }
    }
}

/// Every detected person of one frame document.
pub fn parse_openpose(text: &str, path: &Path, frame: usize) -> Result<Vec<Vec<Keypoint2D>>> {
    let doc: OpenPoseDocument = serde_json::from_str(text).map_err(|e| PipelineError::parse(path, Some(frame), e))?;
    doc.people
        .iter()
        .enumerate()
        .map(|(i, person)| {
            let values = &person.pose_keypoints_2d;
            if values.len() != 3 * NUM_OBSERVATION_JOINTS {
                return Err(PipelineError::parse(
                    path,
                    Some(frame),
                    format!("person {i} has {} keypoint values, expected {}", values.len(), 3 * NUM_OBSERVATION_JOINTS),
                ));
            }
            values
                .chunks_exact(3)
                .map(|c| {
                    if !c.iter().all(|v| v.is_finite()) || !(0.0..=1.0).contains(&c[2]) {
                        Err(PipelineError::parse(path, Some(frame), format!("person {i} has an invalid keypoint {c:?}")))
                    } else {
                        Ok(Keypoint2D::new(c[0], c[1], c[2]))
                    }
                })
                .collect()
        })
        .collect()
}

fn summed_confidence(keypoints: &[Keypoint2D]) -> f64 {
    keypoints.iter().map(|k| k.confidence).sum()
}

fn centroid(keypoints: &[Keypoint2D]) -> Option<Vector2<f64>> {
    let (sum, weight) = keypoints
        .iter()
        .filter(|k| k.confidence > 0.0)
        .fold((Vector2::zeros(), 0.0), |(s, w), k| (s + k.position() * k.confidence, w + k.confidence));
    (weight > 0.0).then(|| sum / weight)
}

/// Index of the tracked person. Under the default policy the previous
/// frame's centroid picks among detections whose summed confidence is at
/// least half the best one; without a previous centroid the most confident
/// detection wins.
pub fn select_person(people: &[Vec<Keypoint2D>], previous: Option<Vector2<f64>>, policy: TrackingPolicy) -> Option<usize> {
    match policy {
        TrackingPolicy::PersonIndex(i) => (i < people.len()).then_some(i),
        TrackingPolicy::HighestConfidence => {
            let scores: Vec<f64> = people.iter().map(|p| summed_confidence(p)).collect();
            let best = (0..people.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))?;
            let Some(prev) = previous else {
                return Some(best);
            };
            (0..people.len())
                .filter(|&i| scores[i] >= 0.5 * scores[best])
                .filter_map(|i| centroid(&people[i]).map(|c| (i, (c - prev).norm())))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .or(Some(best))
        }
    }
}

fn frame_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = std::fs::read_dir(path).map_err(|e| PipelineError::parse(path, None, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Keypoints of the tracked person per frame, `None` where nobody was
/// detected. `path` is a single document or a directory of per-frame
/// documents taken in file-name order.
pub fn load_keypoints(path: &Path, policy: TrackingPolicy) -> Result<Vec<Option<Vec<Keypoint2D>>>> {
    let mut previous = None;
    let mut out = Vec::new();
    for (frame, file) in frame_files(path)?.iter().enumerate() {
        let text = std::fs::read_to_string(file).map_err(|e| PipelineError::parse(file, Some(frame), e))?;
        let people = parse_openpose(&text, file, frame)?;
        let picked = select_person(&people, previous, policy).map(|i| people[i].clone());
        if let Some(c) = picked.as_deref().and_then(centroid) {
            previous = Some(c);
        }
        out.push(picked);
    }
    Ok(out)
}

/// Square crop around the confident keypoints: the tight box, its short
/// side expanded symmetrically, scaled by [`CROP_MARGIN`], at least
/// [`CROP_MIN_SIDE`] and moved (then shrunk if needed) to lie in the image.
pub fn derive_crop(keypoints: &[Keypoint2D], image_size: (f64, f64)) -> Result<CropSpec> {
    let confident: Vec<_> = keypoints.iter().filter(|k| k.confidence > 0.0).collect();
    if confident.is_empty() {
        return Err(PipelineError::NoConfidentKeypoints);
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in confident {
        x0 = x0.min(k.x);
        y0 = y0.min(k.y);
        x1 = x1.max(k.x);
        y1 = y1.max(k.y);
    }
    let (width, height) = image_size;
    let side = ((x1 - x0).max(y1 - y0) * CROP_MARGIN).max(CROP_MIN_SIDE).min(width.min(height));
    let half = side / 2.0;
    let cx = ((x0 + x1) / 2.0).clamp(half, width - half);
    let cy = ((y0 + y1) / 2.0).clamp(half, height - half);
    Ok(CropSpec::new(cx, cy, side))
}

/// Crop used when a frame has no usable detection; such frames are not
/// fitted but still need a well-formed observation.
pub fn fallback_crop(image_size: (f64, f64)) -> CropSpec {
    let (width, height) = image_size;
    CropSpec::new(width / 2.0, height / 2.0, width.min(height))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitFrame {
    pub frame_index: u64,
    /// 72 axis-angle pose parameters, radians.
    pub theta: Vec<f64>,
    /// Crop-frame camera `[s, tx, ty]`.
    pub cam: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<CropSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitFile {
    pub version: u32,
    /// `[W, H]` in pixels.
    pub image_size: [f64; 2],
    pub frames: Vec<InitFrame>,
}

/// Joint positions and part orientations of one frame, used for ground
/// truth and for fitted predictions alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonFrame {
    pub frame_index: u64,
    /// Meters, camera coordinates.
    pub joints3d: Vec<[f64; 3]>,
    /// Row-major rotation matrices in part order: root, left/right upper
    /// arm, left/right lower arm, left/right upper leg, left/right lower leg.
    pub parts: Vec<[[f64; 3]; 3]>,
}

impl SkeletonFrame {
    pub fn from_skeleton(frame_index: u64, joints: &[Vector3<f64>], parts: &PartOrientations) -> Self {
        Self {
            frame_index,
            joints3d: joints.iter().map(|p| [p.x, p.y, p.z]).collect(),
            parts: parts
                .0
                .iter()
                .map(|r| {
                    let m = r.matrix();
                    [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
                })
                .collect(),
        }
    }

    pub fn joints(&self) -> Vec<Vector3<f64>> {
        self.joints3d.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect()
    }

    pub fn part_orientations(&self) -> Result<PartOrientations, String> {
        if self.parts.len() != 9 {
            return Err(format!("{} part orientations, expected 9", self.parts.len()));
        }
        let mut out = PartOrientations::identity();
        for (slot, rows) in out.0.iter_mut().zip(&self.parts) {
            let m = Matrix3::from_fn(|i, j| rows[i][j]);
            *slot = RotationMatrix::from_matrix_with_tolerance(m, EXTERNAL_ROTATION_TOLERANCE)
                .map_err(|e| e.to_string())?
                .orthonormalized();
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.joints3d.len() != NUM_JOINTS {
            return Err(format!("{} joints, expected {NUM_JOINTS}", self.joints3d.len()));
        }
        if !self.joints3d.iter().flatten().all(|v| v.is_finite()) {
            return Err("non-finite joint coordinate".into());
        }
        self.part_orientations().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub version: u32,
    pub units: String,
    pub frames: Vec<SkeletonFrame>,
}

impl GroundTruthFile {
    pub fn new(frames: Vec<SkeletonFrame>) -> Self {
        Self {
            version: FORMAT_VERSION,
            units: "meters".into(),
            frames,
        }
    }
}

/// Frames ready for fitting, with ground truth aligned frame by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceInput {
    pub source: String,
    pub image_size: (f64, f64),
    pub frames: Vec<FrameObservation>,
    pub ground_truth: Option<Vec<SkeletonFrame>>,
}

/// Joins per-frame keypoints with the initialization sidecar (in order) and
/// optional ground truth (by frame index). Frames without a detection get
/// zero-confidence keypoints so that fitting reports them as unfittable.
pub fn assemble_sequence(
    source: &str,
    keypoints: Vec<Option<Vec<Keypoint2D>>>,
    init: &InitFile,
    init_path: &Path,
    ground_truth: Option<(&GroundTruthFile, &Path)>,
    nominal_rate: f64,
) -> Result<SequenceInput> {
    let [width, height] = init.image_size;
    if !(width > 0.0 && height > 0.0) {
        return Err(PipelineError::parse(init_path, None, "image_size must be positive"));
    }
    if init.frames.len() != keypoints.len() {
        return Err(PipelineError::parse(
            init_path,
            None,
            format!("{} initialization frames for {} keypoint frames", init.frames.len(), keypoints.len()),
        ));
    }
    let image_size = (width, height);
    let mut frames = Vec::with_capacity(keypoints.len());
    let mut last_index = None;
    for (i, (kps, init_frame)) in keypoints.into_iter().zip(&init.frames).enumerate() {
        if last_index.is_some_and(|prev| init_frame.frame_index <= prev) {
            return Err(PipelineError::parse(init_path, Some(i), "frame indices must be strictly increasing"));
        }
        last_index = Some(init_frame.frame_index);
        let keypoints = kps.unwrap_or_else(|| vec![Keypoint2D::new(0.0, 0.0, 0.0); NUM_OBSERVATION_JOINTS]);
        let init_pose = PoseParams::from_vec(init_frame.theta.clone()).map_err(|e| PipelineError::parse(init_path, Some(i), e))?;
        let [s, tx, ty] = init_frame.cam;
        if !(s > 0.0) || !tx.is_finite() || !ty.is_finite() {
            return Err(PipelineError::parse(init_path, Some(i), format!("invalid camera {:?}", init_frame.cam)));
        }
        let crop = match init_frame.crop {
            Some(crop) => crop,
            None => derive_crop(&keypoints, image_size).unwrap_or_else(|_| fallback_crop(image_size)),
        };
        let timestamp = init_frame.timestamp.unwrap_or(init_frame.frame_index as f64 / nominal_rate);
        frames.push(FrameObservation {
            keypoints,
            image_size,
            crop: CropSpec { res: CROP_RESOLUTION, ..crop },
            init_pose,
            init_cam: WeakCameraParams { s, tx, ty },
            frame_index: init_frame.frame_index,
            timestamp,
        });
    }
    let ground_truth = match ground_truth {
        None => None,
        Some((gt, gt_path)) => {
            let mut by_index = BTreeMap::new();
            for (i, f) in gt.frames.iter().enumerate() {
                f.validate().map_err(|m| PipelineError::parse(gt_path, Some(i), m))?;
                by_index.insert(f.frame_index, f.clone());
            }
            let aligned = frames
                .iter()
                .map(|f| {
                    by_index
                        .get(&f.frame_index)
                        .cloned()
                        .ok_or_else(|| PipelineError::parse(gt_path, None, format!("no ground truth for frame {}", f.frame_index)))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(aligned)
        }
    };
    Ok(SequenceInput {
        source: source.to_string(),
        image_size,
        frames,
        ground_truth,
    })
}

pub fn load_sequence(
    keypoints_path: &Path,
    init_path: &Path,
    gt_path: Option<&Path>,
    policy: TrackingPolicy,
    nominal_rate: f64,
) -> Result<SequenceInput> {
    let keypoints = load_keypoints(keypoints_path, policy)?;
    let init: InitFile = read_json(init_path)?;
    let gt: Option<GroundTruthFile> = gt_path.map(read_json).transpose()?;
    assemble_sequence(
        &keypoints_path.display().to_string(),
        keypoints,
        &init,
        init_path,
        gt.as_ref().zip(gt_path),
        nominal_rate,
    )
}

/// Writes `seq` in the three input formats under `dir`: `keypoints/`,
/// `init.json` and, when present, `ground_truth.json`.
pub fn save_sequence(seq: &SequenceInput, dir: &Path) -> Result<()> {
    for (i, f) in seq.frames.iter().enumerate() {
        let path = dir.join("keypoints").join(format!("frame_{i:06}_keypoints.json"));
        write_json(&path, &OpenPoseDocument::single(&f.keypoints))?;
    }
    let init = InitFile {
        version: FORMAT_VERSION,
        image_size: [seq.image_size.0, seq.image_size.1],
        frames: seq
            .frames
            .iter()
            .map(|f| InitFrame {
                frame_index: f.frame_index,
                theta: f.init_pose.as_slice().to_vec(),
                cam: [f.init_cam.s, f.init_cam.tx, f.init_cam.ty],
                crop: Some(f.crop),
                timestamp: Some(f.timestamp),
            })
            .collect(),
    };
    write_json(&dir.join("init.json"), &init)?;
    if let Some(gt) = &seq.ground_truth {
        write_json(&dir.join("ground_truth.json"), &GroundTruthFile::new(gt.clone()))?;
    }
    Ok(())
}
