//! Fitting runs, evaluation and parameter sweeps over a sequence.

use perspfit_core::body::{forward_kinematics, JointMapping, KinematicTree};
use perspfit_core::fitting::{fit_frame, FitConfig, FitResult};
use perspfit_core::metrics::{evaluate, EvalPair, MetricsReport};
use perspfit_core::smoothing::{smooth_sequence, TimedSkeleton};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};
use crate::io::{SequenceInput, SkeletonFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFit {
    pub frame_index: u64,
    pub timestamp: f64,
    /// The fit, or why the frame could not be fitted.
    pub outcome: std::result::Result<FitResult, String>,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Fits every frame independently on `workers` threads (0: all cores).
/// Frames that cannot be fitted are reported, not fatal.
pub fn fit_sequence(
    seq: &SequenceInput,
    tree: &KinematicTree,
    mapping: &JointMapping,
    cfg: &FitConfig,
    workers: usize,
) -> Result<Vec<FrameFit>> {
    cfg.validate()?;
    let fit_one = |f: &perspfit_core::fitting::FrameObservation| FrameFit {
        frame_index: f.frame_index,
        timestamp: f.timestamp,
        outcome: fit_frame(f, tree, mapping, cfg).map_err(|e| {
            log::warn!("frame {} is unfittable: {e}", f.frame_index);
            e.to_string()
        }),
    };
    if workers == 1 {
        return Ok(seq.frames.iter().map(fit_one).collect());
    }
    Ok(thread_pool(workers)?.install(|| seq.frames.par_iter().map(fit_one).collect()))
}

/// Camera-frame joints and part orientations of a fitted frame.
pub fn predicted_skeleton(tree: &KinematicTree, fit: &FitResult, timestamp: f64) -> TimedSkeleton {
    let skel = forward_kinematics(tree, &fit.pose);
    TimedSkeleton {
        timestamp,
        joints3d: skel.joints3d.iter().map(|p| p + fit.camera_translation.0).collect(),
        parts: skel.parts,
    }
}

pub fn skeletons(tree: &KinematicTree, fits: &[FrameFit]) -> Vec<Option<TimedSkeleton>> {
    fits.iter()
        .map(|f| f.outcome.as_ref().ok().map(|r| predicted_skeleton(tree, r, f.timestamp)))
        .collect()
}

/// Metrics over the frames that have a prediction.
pub fn evaluate_predictions(predictions: &[Option<TimedSkeleton>], ground_truth: &[SkeletonFrame]) -> Result<MetricsReport> {
    if predictions.len() != ground_truth.len() {
        return Err(PipelineError::Config(format!(
            "{} predictions for {} ground-truth frames",
            predictions.len(),
            ground_truth.len()
        )));
    }
    let pairs = predictions
        .iter()
        .zip(ground_truth)
        .filter_map(|(p, g)| p.as_ref().map(|p| (p, g)))
        .map(|(p, g)| {
            Ok(EvalPair {
                pred_joints: p.joints3d.clone(),
                gt_joints: g.joints(),
                pred_parts: p.parts,
                gt_parts: g.part_orientations().map_err(PipelineError::Config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(evaluate(&pairs)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub fits: Vec<FrameFit>,
    pub raw: Vec<Option<TimedSkeleton>>,
    pub smoothed: Option<Vec<Option<TimedSkeleton>>>,
    pub metrics_raw: Option<MetricsReport>,
    pub metrics_smoothed: Option<MetricsReport>,
}

impl RunOutput {
    pub fn unfittable(&self) -> usize {
        self.fits.iter().filter(|f| f.outcome.is_err()).count()
    }

    /// Smoothed skeletons when smoothing ran, raw ones otherwise.
    pub fn final_skeletons(&self) -> &[Option<TimedSkeleton>] {
        self.smoothed.as_deref().unwrap_or(&self.raw)
    }

    pub fn final_metrics(&self) -> Option<&MetricsReport> {
        self.metrics_smoothed.as_ref().or(self.metrics_raw.as_ref())
    }
}

pub fn run_fit(seq: &SequenceInput, tree: &KinematicTree, mapping: &JointMapping, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let fit_cfg = cfg.fit_config_for(seq.image_size.0, seq.image_size.1)?;
    let fits = fit_sequence(seq, tree, mapping, &fit_cfg, cfg.workers)?;
    let raw = skeletons(tree, &fits);
    let smoothed = if cfg.smoothing_enabled {
        Some(smooth_sequence(&raw, &cfg.smoothing)?)
    } else {
        None
    };
    let (metrics_raw, metrics_smoothed) = match &seq.ground_truth {
        None => (None, None),
        Some(gt) => (
            Some(evaluate_predictions(&raw, gt)?),
            smoothed.as_ref().map(|s| evaluate_predictions(s, gt)).transpose()?,
        ),
    };
    Ok(RunOutput {
        fits,
        raw,
        smoothed,
        metrics_raw,
        metrics_smoothed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Focal,
    Iterations,
    CameraCenter,
}

/// Aggregate metrics without the per-frame breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mpjpe: f64,
    pub mpjpe_pa: f64,
    pub pck: f64,
    pub auc: f64,
    pub mpjae: f64,
    pub mpjae_pa: f64,
}

impl From<&MetricsReport> for MetricsSummary {
    fn from(r: &MetricsReport) -> Self {
        Self {
            mpjpe: r.mpjpe,
            mpjpe_pa: r.mpjpe_pa,
            pck: r.pck,
            auc: r.auc,
            mpjae: r.mpjae,
            mpjae_pa: r.mpjae_pa,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub value: f64,
    pub metrics: MetricsSummary,
    pub unfittable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn row(&self, label: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Reruns the fit once per swept setting. Focal values are multiples of the
/// configured focal length.
pub fn run_sweep(seq: &SequenceInput, tree: &KinematicTree, mapping: &JointMapping, cfg: &RunConfig, kind: SweepKind) -> Result<SweepTable> {
    if seq.ground_truth.is_none() {
        return Err(PipelineError::Config("sweeps need ground truth".into()));
    }
    cfg.validate()?;
    let base_focal = cfg
        .fit_config_for(seq.image_size.0, seq.image_size.1)?
        .focal_override
        .expect("resolved focal");
    let settings: Vec<(String, f64, RunConfig)> = match kind {
        SweepKind::Focal => cfg
            .sweep
            .focal_factors
            .iter()
            .map(|&factor| {
                let mut c = cfg.clone();
                c.focal = crate::config::FocalSource::Approximate;
                c.fit.focal_override = Some(base_focal * factor);
                (format!("{factor}x"), factor, c)
            })
            .collect(),
        SweepKind::Iterations => cfg
            .sweep
            .iterations
            .iter()
            .map(|&n| {
                let mut c = cfg.clone();
                c.fit.iterations = n;
                (n.to_string(), n as f64, c)
            })
            .collect(),
        SweepKind::CameraCenter => [
            (perspfit_core::fitting::CameraCenterMode::BboxCenter, "bbox_center"),
            (perspfit_core::fitting::CameraCenterMode::ImageCenter, "image_center"),
        ]
        .into_iter()
        .enumerate()
        .map(|(i, (mode, label))| {
            let mut c = cfg.clone();
            c.fit.camera_center_mode = mode;
            (label.to_string(), i as f64, c)
        })
        .collect(),
    };
    let rows = settings
        .into_iter()
        .map(|(label, value, c)| {
            let out = run_fit(seq, tree, mapping, &c)?;
            let metrics = out.final_metrics().expect("ground truth present");
            log::info!("sweep {label}: MPJPE {:.2} mm", metrics.mpjpe);
            Ok(SweepRow {
                label,
                value,
                metrics: MetricsSummary::from(metrics),
                unfittable: out.unfittable(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { kind, rows })
}
