//! Versioned run reports: JSON for machines, CSV for spreadsheets.

use std::path::Path;

use perspfit_core::camera::Intrinsics;
use perspfit_core::fitting::ConvergedFlags;
use perspfit_core::metrics::{FrameMetrics, MetricsReport};
use perspfit_core::smoothing::TimedSkeleton;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};
use crate::harness::{RunOutput, SweepTable};
use crate::io::{read_json, write_json, SkeletonFrame};
use crate::plot::plot_sweep;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameStatus {
    Fitted,
    Unfittable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub pose: Vec<f64>,
    pub camera_translation: [f64; 3],
    pub intrinsics: Intrinsics,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_trace: Vec<f64>,
    pub converged: ConvergedFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: u64,
    pub timestamp: f64,
    pub status: FrameStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitRecord>,
    /// Camera-frame prediction straight from the fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<SkeletonFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothed_skeleton: Option<SkeletonFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub source: String,
    pub config: RunConfig,
    pub frames: Vec<FrameRecord>,
    pub unfittable_frames: usize,
    /// Metrics of the final (smoothed, when enabled) predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    /// Metrics of the raw fits when smoothing ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_unsmoothed: Option<MetricsReport>,
}

fn skeleton_frame(frame_index: u64, s: &TimedSkeleton) -> SkeletonFrame {
    SkeletonFrame::from_skeleton(frame_index, &s.joints3d, &s.parts)
}

fn timed(frame: &SkeletonFrame, timestamp: f64) -> Result<TimedSkeleton> {
    Ok(TimedSkeleton {
        timestamp,
        joints3d: frame.joints(),
        parts: frame.part_orientations().map_err(PipelineError::Config)?,
    })
}

impl Report {
    pub fn empty(source: &str, config: &RunConfig) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            source: source.to_string(),
            config: config.clone(),
            frames: Vec::new(),
            unfittable_frames: 0,
            metrics: None,
            metrics_unsmoothed: None,
        }
    }

    pub fn from_run(source: &str, config: &RunConfig, out: &RunOutput) -> Self {
        let frames = out
            .fits
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let skeleton = out.raw[i].as_ref().map(|s| skeleton_frame(f.frame_index, s));
                let smoothed_skeleton = out
                    .smoothed
                    .as_ref()
                    .and_then(|s| s[i].as_ref())
                    .map(|s| skeleton_frame(f.frame_index, s));
                match &f.outcome {
                    Ok(r) => FrameRecord {
                        frame_index: f.frame_index,
                        timestamp: f.timestamp,
                        status: FrameStatus::Fitted,
                        error: None,
                        fit: Some(FitRecord {
                            pose: r.pose.as_slice().to_vec(),
                            camera_translation: r.camera_translation.0.into(),
                            intrinsics: r.intrinsics,
                            initial_loss: r.initial_loss,
                            final_loss: r.final_loss,
                            loss_trace: r.loss_trace.clone(),
                            converged: r.converged,
                        }),
                        skeleton,
                        smoothed_skeleton,
                    },
                    Err(e) => FrameRecord {
                        frame_index: f.frame_index,
                        timestamp: f.timestamp,
                        status: FrameStatus::Unfittable,
                        error: Some(e.clone()),
                        fit: None,
                        skeleton: None,
                        smoothed_skeleton: None,
                    },
                }
            })
            .collect();
        let (metrics, metrics_unsmoothed) = match (&out.metrics_smoothed, &out.metrics_raw) {
            (Some(s), raw) => (Some(s.clone()), raw.clone()),
            (None, raw) => (raw.clone(), None),
        };
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            source: source.to_string(),
            config: config.clone(),
            frames,
            unfittable_frames: out.unfittable(),
            metrics,
            metrics_unsmoothed,
        }
    }

    /// Raw fitted skeletons, `None` for unfittable frames.
    pub fn raw_skeletons(&self) -> Result<Vec<Option<TimedSkeleton>>> {
        self.frames
            .iter()
            .map(|f| f.skeleton.as_ref().map(|s| timed(s, f.timestamp)).transpose())
            .collect()
    }

    /// Smoothed skeletons where present, raw ones otherwise.
    pub fn final_skeletons(&self) -> Result<Vec<Option<TimedSkeleton>>> {
        self.frames
            .iter()
            .map(|f| {
                f.smoothed_skeleton
                    .as_ref()
                    .or(f.skeleton.as_ref())
                    .map(|s| timed(s, f.timestamp))
                    .transpose()
            })
            .collect()
    }

    /// Replaces the smoothed skeletons.
    pub fn set_smoothed(&mut self, smoothed: &[Option<TimedSkeleton>]) {
        for (f, s) in self.frames.iter_mut().zip(smoothed) {
            f.smoothed_skeleton = s.as_ref().map(|s| skeleton_frame(f.frame_index, s));
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let report: Report = read_json(path)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(PipelineError::parse(
                path,
                None,
                format!("report schema {} is not supported (expected {REPORT_SCHEMA_VERSION})", report.schema_version),
            ));
        }
        Ok(report)
    }

    /// Writes `report.json` and `frames.csv` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join("report.json"), self)?;
        let path = dir.join("frames.csv");
        let mut writer = csv::Writer::from_path(&path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => PipelineError::Write { path: path.clone(), source },
            other => PipelineError::Config(format!("{other:?}")),
        })?;
        let mut per_frame = self.metrics.iter().flat_map(|m| m.per_frame.iter());
        for f in &self.frames {
            let metrics = match (&f.status, self.metrics.is_some()) {
                (FrameStatus::Fitted, true) => per_frame.next(),
                _ => None,
            };
            writer.serialize(CsvRow::new(f, metrics))?;
        }
        writer.flush().map_err(|source| PipelineError::Write { path, source })
    }
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    frame_index: u64,
    timestamp: f64,
    status: FrameStatus,
    initial_loss: Option<f64>,
    final_loss: Option<f64>,
    tx: Option<f64>,
    ty: Option<f64>,
    tz: Option<f64>,
    mpjpe: Option<f64>,
    mpjpe_pa: Option<f64>,
    pck: Option<f64>,
    auc: Option<f64>,
    mpjae: Option<f64>,
    mpjae_pa: Option<f64>,
    error: Option<&'a str>,
}

impl<'a> CsvRow<'a> {
    fn new(f: &'a FrameRecord, m: Option<&FrameMetrics>) -> Self {
        let fit = f.fit.as_ref();
        Self {
            frame_index: f.frame_index,
            timestamp: f.timestamp,
            status: f.status,
            initial_loss: fit.map(|r| r.initial_loss),
            final_loss: fit.map(|r| r.final_loss),
            tx: fit.map(|r| r.camera_translation[0]),
            ty: fit.map(|r| r.camera_translation[1]),
            tz: fit.map(|r| r.camera_translation[2]),
            mpjpe: m.map(|m| m.mpjpe),
            mpjpe_pa: m.map(|m| m.mpjpe_pa),
            pck: m.map(|m| m.pck),
            auc: m.map(|m| m.auc),
            mpjae: m.map(|m| m.mpjae),
            mpjae_pa: m.map(|m| m.mpjae_pa),
            error: f.error.as_deref(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SweepCsvRow<'a> {
    label: &'a str,
    value: f64,
    mpjpe: f64,
    mpjpe_pa: f64,
    pck: f64,
    auc: f64,
    mpjae: f64,
    mpjae_pa: f64,
    unfittable: usize,
}

/// Writes `sweep.json`, `sweep.csv` and one SVG plot per metric under `dir`.
pub fn write_sweep(table: &SweepTable, dir: &Path) -> Result<()> {
    write_json(&dir.join("sweep.json"), table)?;
    let path = dir.join("sweep.csv");
    let mut writer = csv::Writer::from_path(&path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => PipelineError::Write { path: path.clone(), source },
        other => PipelineError::Config(format!("{other:?}")),
    })?;
    for r in &table.rows {
        let m = &r.metrics;
        writer.serialize(SweepCsvRow {
            label: &r.label,
            value: r.value,
            mpjpe: m.mpjpe,
            mpjpe_pa: m.mpjpe_pa,
            pck: m.pck,
            auc: m.auc,
            mpjae: m.mpjae,
            mpjae_pa: m.mpjae_pa,
            unfittable: r.unfittable,
        })?;
    }
    writer.flush().map_err(|source| PipelineError::Write { path, source })?;
    for metric in ["mpjpe", "mpjpe_pa", "pck", "auc", "mpjae", "mpjae_pa"] {
        plot_sweep(table, metric, &dir.join(format!("sweep_{metric}.svg")))?;
    }
    Ok(())
}
