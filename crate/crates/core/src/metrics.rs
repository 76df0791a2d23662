//! Evaluation metrics over predicted and ground-truth skeletons.
//!
//! Position errors are reported in millimeters, angles in degrees. Joint 0
//! (pelvis) is the root used for matching.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::body::{PartOrientations, NUM_JOINTS};
use crate::geometry::{geodesic_distance, procrustes_align, rigid_align, SimilarityTransform};

/// Shoulders, elbows, wrists, hips, knees and ankles.
pub const PCK_JOINTS: [usize; 12] = [16, 17, 18, 19, 20, 21, 1, 2, 4, 5, 7, 8];
pub const PCK_THRESHOLD_MM: f64 = 50.0;
pub const AUC_MAX_MM: f64 = 200.0;
pub const AUC_STEPS: usize = 201;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{which} skeleton has {found} joints, expected {NUM_JOINTS}")]
    JointCount { which: &'static str, found: usize },
    #[error("AUC needs at least two thresholds and a positive range")]
    InvalidAucGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    /// Meters.
    pub pred_joints: Vec<Vector3<f64>>,
    /// Meters.
    pub gt_joints: Vec<Vector3<f64>>,
    pub pred_parts: PartOrientations,
    pub gt_parts: PartOrientations,
}

impl EvalPair {
    pub fn validate(&self) -> Result<(), MetricsError> {
        for (which, joints) in [("predicted", &self.pred_joints), ("ground-truth", &self.gt_joints)] {
            if joints.len() != NUM_JOINTS {
                return Err(MetricsError::JointCount {
                    which,
                    found: joints.len(),
                });
            }
        }
        Ok(())
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-joint distances in mm after translating the prediction so that the
/// roots coincide.
pub fn root_matched_errors(pair: &EvalPair) -> Vec<f64> {
    let shift = pair.gt_joints[0] - pair.pred_joints[0];
    pair.pred_joints
        .iter()
        .zip(&pair.gt_joints)
        .map(|(p, g)| (p + shift - g).norm() * 1000.0)
        .collect()
}

pub fn mpjpe(pair: &EvalPair) -> f64 {
    mean(root_matched_errors(pair))
}

/// Similarity transform aligning the prediction to the ground truth, and
/// whether it had to fall back to a unit-scale rigid alignment because the
/// prediction was degenerate.
pub fn pa_alignment(pair: &EvalPair) -> (SimilarityTransform, bool) {
    match procrustes_align(&pair.pred_joints, &pair.gt_joints) {
        Ok(t) => (t, false),
        Err(e) => {
            log::warn!("Procrustes alignment degraded to rigid alignment: {e}");
            let t = rigid_align(&pair.pred_joints, &pair.gt_joints).unwrap_or_else(|_| SimilarityTransform::identity());
            (t, true)
        }
    }
}

fn mpjpe_with(pair: &EvalPair, t: &SimilarityTransform) -> f64 {
    mean(
        pair.pred_joints
            .iter()
            .zip(&pair.gt_joints)
            .map(|(p, g)| (t.apply(p) - g).norm() * 1000.0),
    )
}

pub fn mpjpe_pa(pair: &EvalPair) -> f64 {
    mpjpe_with(pair, &pa_alignment(pair).0)
}

fn pck_counts(pair: &EvalPair, threshold_mm: f64) -> usize {
    let errors = root_matched_errors(pair);
    PCK_JOINTS.iter().filter(|&&j| errors[j] < threshold_mm).count()
}

/// Percentage of the 12 limb joints closer than `threshold_mm` after root
/// matching, over all frames.
pub fn pck(pairs: &[EvalPair], threshold_mm: f64) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits: usize = pairs.iter().map(|p| pck_counts(p, threshold_mm)).sum();
    100.0 * hits as f64 / (pairs.len() * PCK_JOINTS.len()) as f64
}

/// Mean of PCK/100 over `steps` evenly spaced thresholds in `[0, t_max]` mm.
pub fn auc(pairs: &[EvalPair], t_max_mm: f64, steps: usize) -> Result<f64, MetricsError> {
    if steps < 2 || !(t_max_mm > 0.0) {
        return Err(MetricsError::InvalidAucGrid);
    }
    let thresholds = (0..steps).map(|i| t_max_mm * i as f64 / (steps - 1) as f64);
    Ok(mean(thresholds.map(|t| pck(pairs, t) / 100.0)))
}

fn mpjae_with(pair: &EvalPair, correction: Option<&SimilarityTransform>) -> f64 {
    mean(pair.pred_parts.0.iter().zip(&pair.gt_parts.0).map(|(p, g)| {
        let p = match correction {
            Some(t) => t.rotation * *p,
            None => *p,
        };
        geodesic_distance(&p, g).to_degrees()
    }))
}

/// Mean geodesic angle over the 9 parts, degrees.
pub fn mpjae(pair: &EvalPair) -> f64 {
    mpjae_with(pair, None)
}

/// [`mpjae`] after rotating every predicted part by the joint-alignment
/// rotation.
pub fn mpjae_pa(pair: &EvalPair) -> f64 {
    mpjae_with(pair, Some(&pa_alignment(pair).0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub mpjpe: f64,
    pub mpjpe_pa: f64,
    pub pck: f64,
    pub auc: f64,
    pub mpjae: f64,
    pub mpjae_pa: f64,
    pub degraded_alignment: bool,
}

pub fn frame_metrics(pair: &EvalPair) -> Result<FrameMetrics, MetricsError> {
    pair.validate()?;
    let (alignment, degraded) = pa_alignment(pair);
    let single = std::slice::from_ref(pair);
    Ok(FrameMetrics {
        mpjpe: mpjpe(pair),
        mpjpe_pa: mpjpe_with(pair, &alignment),
        pck: pck(single, PCK_THRESHOLD_MM),
        auc: auc(single, AUC_MAX_MM, AUC_STEPS)?,
        mpjae: mpjae(pair),
        mpjae_pa: mpjae_with(pair, Some(&alignment)),
        degraded_alignment: degraded,
    })
}

/// Aggregates are means of the per-frame values; every frame contributes
/// the same joint and part counts, so this equals pooling all joints.
/// An empty report has zero frames and zero-valued aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    pub frames: usize,
    /// mm.
    pub mpjpe: f64,
    /// mm.
    pub mpjpe_pa: f64,
    /// Percent.
    pub pck: f64,
    pub auc: f64,
    /// Degrees.
    pub mpjae: f64,
    /// Degrees.
    pub mpjae_pa: f64,
    pub degraded_frames: usize,
    pub per_frame: Vec<FrameMetrics>,
}

impl MetricsReport {
    pub fn from_frames(per_frame: Vec<FrameMetrics>) -> Self {
        let agg = |f: fn(&FrameMetrics) -> f64| mean(per_frame.iter().map(f));
        Self {
            frames: per_frame.len(),
            mpjpe: agg(|m| m.mpjpe),
            mpjpe_pa: agg(|m| m.mpjpe_pa),
            pck: agg(|m| m.pck),
            auc: agg(|m| m.auc),
            mpjae: agg(|m| m.mpjae),
            mpjae_pa: agg(|m| m.mpjae_pa),
            degraded_frames: per_frame.iter().filter(|m| m.degraded_alignment).count(),
            per_frame,
        }
    }

    /// `(name, value)` for the six aggregate metrics, lower-is-better first.
    pub fn summary(&self) -> [(&'static str, f64); 6] {
        [
            ("mpjpe", self.mpjpe),
            ("mpjpe_pa", self.mpjpe_pa),
            ("mpjae", self.mpjae),
            ("mpjae_pa", self.mpjae_pa),
            ("pck", self.pck),
            ("auc", self.auc),
        ]
    }

    /// True when every metric of `self` is at least as good as `other`'s,
    /// within `tol` (relative to the metric's magnitude).
    pub fn improves_or_ties(&self, other: &MetricsReport, tol: f64) -> bool {
        self.summary().iter().zip(other.summary()).all(|((name, a), (_, b))| {
            let slack = tol * a.abs().max(b.abs());
            if matches!(*name, "pck" | "auc") {
                *a >= b - slack
            } else {
                *a <= b + slack
            }
        })
    }

    /// True when every metric of `self` is strictly better than `other`'s.
    pub fn strictly_better(&self, other: &MetricsReport) -> bool {
        self.summary().iter().zip(other.summary()).all(|((name, a), (_, b))| {
            if matches!(*name, "pck" | "auc") {
                *a > b
            } else {
                *a < b
            }
        })
    }
}

pub fn evaluate(pairs: &[EvalPair]) -> Result<MetricsReport, MetricsError> {
    let per_frame = pairs.iter().map(frame_metrics).collect::<Result<Vec<_>, _>>()?;
    Ok(MetricsReport::from_frames(per_frame))
}
