//! Articulated 24-joint body: kinematic tree, axis-angle pose, forward
//! kinematics and the linear map onto the 25 BODY_25 observation joints.
//!
//! The bone-offset template and the joint map are data files shipped in
//! `data/`; custom files with the same schema can be loaded at run time.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{axis_angle_to_matrix, left_jacobian, AxisAngle, RotationMatrix};

pub const NUM_JOINTS: usize = 24;
pub const NUM_OBSERVATION_JOINTS: usize = 25;
pub const NUM_POSE_PARAMS: usize = 3 * NUM_JOINTS;

/// Joint order of the 24-joint kinematic tree.
pub const JOINT_NAMES: [&str; NUM_JOINTS] = [
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
];

/// BODY_25 keypoint order.
pub const OBSERVATION_NAMES: [&str; NUM_OBSERVATION_JOINTS] = [
    "nose",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "mid_hip",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_eye",
    "left_eye",
    "right_ear",
    "left_ear",
    "left_big_toe",
    "left_small_toe",
    "left_heel",
    "right_big_toe",
    "right_small_toe",
    "right_heel",
];

const DEFAULT_TEMPLATE: &str = include_str!("../data/skeleton_template.json");
const DEFAULT_MAPPING: &str = include_str!("../data/body25_mapping.json");

#[derive(Debug, Error)]
pub enum BodyError {
    #[error("invalid skeleton template: {0}")]
    Template(String),
    #[error("invalid joint mapping: {0}")]
    Mapping(String),
    #[error("pose must have {NUM_POSE_PARAMS} parameters, got {0}")]
    PoseLength(usize),
    #[error("non-finite pose parameter at index {0}")]
    NonFinitePose(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Deserialize, Serialize)]
struct TemplateFile {
    version: u32,
    #[serde(default)]
    units: Option<String>,
    #[serde(default)]
    description: Option<String>,
    joints: Vec<TemplateJoint>,
}

#[derive(Debug, Deserialize, Serialize)]
struct TemplateJoint {
    name: String,
    parent: Option<usize>,
    offset: [f64; 3],
}

/// Parent indices and rest-pose bone offsets. Joints are topologically
/// ordered with the pelvis as the single root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTree {
    parents: Vec<Option<usize>>,
    offsets: Vec<Vector3<f64>>,
    names: Vec<String>,
}

impl KinematicTree {
    pub fn new(
        parents: Vec<Option<usize>>,
        offsets: Vec<Vector3<f64>>,
        names: Vec<String>,
    ) -> Result<Self, BodyError> {
        let bad = |msg: String| Err(BodyError::Template(msg));
        if parents.len() != NUM_JOINTS || offsets.len() != NUM_JOINTS || names.len() != NUM_JOINTS {
            return bad(format!("expected {NUM_JOINTS} joints"));
        }
        for (j, (parent, name)) in parents.iter().zip(&names).enumerate() {
            if name != JOINT_NAMES[j] {
                return bad(format!("joint {j} is {name:?}, expected {:?}", JOINT_NAMES[j]));
            }
            match (j, parent) {
                (0, None) => {}
                (0, Some(_)) => return bad("joint 0 must be the root".into()),
                (_, None) => return bad(format!("joint {j} has no parent")),
                (_, Some(p)) if *p >= j => return bad(format!("joint {j} has parent {p} not preceding it")),
                _ => {}
            }
        }
        if let Some(j) = offsets.iter().position(|o| !o.iter().all(|v| v.is_finite())) {
            return bad(format!("joint {j} has a non-finite offset"));
        }
        Ok(Self {
            parents,
            offsets,
            names,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, BodyError> {
        let file: TemplateFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(BodyError::Template(format!("unsupported version {}", file.version)));
        }
        let mut parents = Vec::new();
        let mut offsets = Vec::new();
        let mut names = Vec::new();
        for joint in file.joints {
            parents.push(joint.parent);
            offsets.push(Vector3::from(joint.offset));
            names.push(joint.name);
        }
        Self::new(parents, offsets, names)
    }

    pub fn to_json(&self) -> String {
        let file = TemplateFile {
            version: 1,
            units: Some("meters".into()),
            description: None,
            joints: (0..NUM_JOINTS)
                .map(|j| TemplateJoint {
                    name: self.names[j].clone(),
                    parent: self.parents[j],
                    offset: self.offsets[j].into(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("template serializes")
    }

    /// The bundled adult template.
    pub fn default_template() -> Self {
        Self::from_json(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }

    /// Same tree with every offset multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            offsets: self.offsets.iter().map(|o| o * factor).collect(),
            ..self.clone()
        }
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn offset(&self, joint: usize) -> &Vector3<f64> {
        &self.offsets[joint]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// True when `ancestor` lies on the path from the root to `joint`
    /// (a joint is its own ancestor).
    pub fn is_ancestor(&self, ancestor: usize, joint: usize) -> bool {
        let mut j = Some(joint);
        while let Some(k) = j {
            if k == ancestor {
                return true;
            }
            j = self.parents[k];
        }
        false
    }
}

/// 72 axis-angle parameters, three per joint; the first triplet is the
/// global body orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PoseParams(Vec<f64>);

impl PoseParams {
    pub fn zeros() -> Self {
        Self(vec![0.0; NUM_POSE_PARAMS])
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self, BodyError> {
        if values.len() != NUM_POSE_PARAMS {
            return Err(BodyError::PoseLength(values.len()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(BodyError::NonFinitePose(i));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn joint(&self, j: usize) -> AxisAngle {
        AxisAngle(Vector3::from_column_slice(&self.0[3 * j..3 * j + 3]))
    }

    pub fn set_joint(&mut self, j: usize, aa: AxisAngle) {
        self.0[3 * j..3 * j + 3].copy_from_slice(aa.0.as_slice());
    }

    pub fn global_orientation(&self) -> AxisAngle {
        self.joint(0)
    }

    /// Every triplet wrapped into `[0, π]`; applied only when poses are
    /// read or written.
    pub fn canonicalized(&self) -> Self {
        let mut out = self.clone();
        for j in 0..NUM_JOINTS {
            out.set_joint(j, self.joint(j).canonical());
        }
        out
    }
}

impl TryFrom<Vec<f64>> for PoseParams {
    type Error = BodyError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::from_vec(v)
    }
}

impl From<PoseParams> for Vec<f64> {
    fn from(p: PoseParams) -> Self {
        p.0
    }
}

/// The nine body parts whose orientations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Root,
    LeftUpperArm,
    RightUpperArm,
    LeftLowerArm,
    RightLowerArm,
    LeftUpperLeg,
    RightUpperLeg,
    LeftLowerLeg,
    RightLowerLeg,
}

impl Part {
    pub const ALL: [Part; 9] = [
        Part::Root,
        Part::LeftUpperArm,
        Part::RightUpperArm,
        Part::LeftLowerArm,
        Part::RightLowerArm,
        Part::LeftUpperLeg,
        Part::RightUpperLeg,
        Part::LeftLowerLeg,
        Part::RightLowerLeg,
    ];

    /// Model joint whose global rotation orients the part.
    pub fn joint(self) -> usize {
        match self {
            Part::Root => 0,
            Part::LeftUpperArm => 16,
            Part::RightUpperArm => 17,
            Part::LeftLowerArm => 18,
            Part::RightLowerArm => 19,
            Part::LeftUpperLeg => 1,
            Part::RightUpperLeg => 2,
            Part::LeftLowerLeg => 4,
            Part::RightLowerLeg => 5,
        }
    }

    pub fn index(self) -> usize {
        Part::ALL.iter().position(|p| *p == self).unwrap()
    }
}

/// Global orientations of the nine parts, indexed in [`Part::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartOrientations(pub [RotationMatrix; 9]);

impl PartOrientations {
    pub fn identity() -> Self {
        Self([RotationMatrix::identity(); 9])
    }

    pub fn get(&self, part: Part) -> &RotationMatrix {
        &self.0[part.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Part, &RotationMatrix)> {
        Part::ALL.iter().copied().zip(self.0.iter())
    }
}

/// Forward-kinematics output. Joint positions are relative to the root,
/// which sits at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct BodySkeletonOutput {
    pub joints3d: Vec<Vector3<f64>>,
    pub global_rotations: Vec<RotationMatrix>,
    pub parts: PartOrientations,
}

pub fn forward_kinematics(tree: &KinematicTree, pose: &PoseParams) -> BodySkeletonOutput {
    let mut joints3d = Vec::with_capacity(NUM_JOINTS);
    let mut global_rotations: Vec<RotationMatrix> = Vec::with_capacity(NUM_JOINTS);
    for j in 0..NUM_JOINTS {
        let local = axis_angle_to_matrix(&pose.joint(j));
        match tree.parent(j) {
            None => {
                joints3d.push(Vector3::zeros());
                global_rotations.push(local);
            }
            Some(p) => {
                let parent_rot = global_rotations[p];
                joints3d.push(joints3d[p] + parent_rot.rotate(tree.offset(j)));
                global_rotations.push(parent_rot * local);
            }
        }
    }
    let parts = PartOrientations(Part::ALL.map(|part| global_rotations[part.joint()]));
    BodySkeletonOutput {
        joints3d,
        global_rotations,
        parts,
    }
}

/// Vector-Jacobian product of forward kinematics: given `∂L/∂p` for the 24
/// joint positions of `skel = forward_kinematics(tree, pose)`, returns
/// `∂L/∂θ` for all 72 pose parameters.
///
/// Perturbing joint `j`'s local rotation by `δv` moves every joint `k` in
/// its subtree by `(G_parent · J(v) δv) × (p_k − p_j)`, which collapses to
/// `J(v)ᵀ G_parentᵀ Σ_k (p_k − p_j) × g_k`.
pub fn pose_gradient(
    tree: &KinematicTree,
    pose: &PoseParams,
    skel: &BodySkeletonOutput,
    joint_grads: &[Vector3<f64>],
) -> Vec<f64> {
    let mut force = joint_grads.to_vec();
    let mut moment: Vec<Vector3<f64>> = skel
        .joints3d
        .iter()
        .zip(joint_grads)
        .map(|(p, g)| p.cross(g))
        .collect();
    let mut grad = vec![0.0; NUM_POSE_PARAMS];
    for j in (0..NUM_JOINTS).rev() {
        let torque = moment[j] - skel.joints3d[j].cross(&force[j]);
        let parent_rot = tree
            .parent(j)
            .map(|p| *skel.global_rotations[p].matrix())
            .unwrap_or_else(nalgebra::Matrix3::identity);
        let g = left_jacobian(&pose.joint(j).0).transpose() * parent_rot.transpose() * torque;
        grad[3 * j..3 * j + 3].copy_from_slice(g.as_slice());
        if let Some(p) = tree.parent(j) {
            let (f, m) = (force[j], moment[j]);
            force[p] += f;
            moment[p] += m;
        }
    }
    grad
}

#[derive(Debug, Deserialize, Serialize)]
struct MappingFile {
    version: u32,
    #[serde(default)]
    convention: Option<String>,
    rows: Vec<(usize, usize, f64)>,
}

/// Sparse linear map from model joints to observation joints. Each
/// observation joint is a convex combination of model joints.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMapping {
    rows: Vec<(usize, usize, f64)>,
}

impl JointMapping {
    pub fn new(rows: Vec<(usize, usize, f64)>) -> Result<Self, BodyError> {
        let mut totals = [0.0; NUM_OBSERVATION_JOINTS];
        for &(obs, model, weight) in &rows {
            if obs >= NUM_OBSERVATION_JOINTS || model >= NUM_JOINTS {
                return Err(BodyError::Mapping(format!("row ({obs}, {model}) out of range")));
            }
            if !(weight >= 0.0) {
                return Err(BodyError::Mapping(format!("negative weight in row ({obs}, {model})")));
            }
            totals[obs] += weight;
        }
        if let Some(obs) = totals.iter().position(|t| (t - 1.0).abs() > 1e-9) {
            return Err(BodyError::Mapping(format!(
                "weights of observation joint {obs} sum to {}",
                totals[obs]
            )));
        }
        Ok(Self { rows })
    }

    pub fn from_json(text: &str) -> Result<Self, BodyError> {
        let file: MappingFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(BodyError::Mapping(format!("unsupported version {}", file.version)));
        }
        Self::new(file.rows)
    }

    pub fn to_json(&self) -> String {
        let file = MappingFile {
            version: 1,
            convention: Some("BODY_25".into()),
            rows: self.rows.clone(),
        };
        serde_json::to_string_pretty(&file).expect("mapping serializes")
    }

    pub fn default_body25() -> Self {
        Self::from_json(DEFAULT_MAPPING).expect("bundled mapping is valid")
    }

    pub fn rows(&self) -> &[(usize, usize, f64)] {
        &self.rows
    }

    pub fn apply(&self, model: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); NUM_OBSERVATION_JOINTS];
        for &(obs, j, w) in &self.rows {
            out[obs] += model[j] * w;
        }
        out
    }

    /// Transpose of [`JointMapping::apply`], for pulling gradients back.
    pub fn apply_transpose(&self, obs_grads: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); NUM_JOINTS];
        for &(obs, j, w) in &self.rows {
            out[j] += obs_grads[obs] * w;
        }
        out
    }
}

pub fn model_to_observation_joints(skel: &BodySkeletonOutput, mapping: &JointMapping) -> Vec<Vector3<f64>> {
    mapping.apply(&skel.joints3d)
}
