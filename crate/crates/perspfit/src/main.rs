use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use perspfit::config::{FocalSource, RunConfig};
use perspfit::error::{EXIT_OK, EXIT_UNFITTABLE, EXIT_USAGE};
use perspfit::harness::{evaluate_predictions, run_fit, run_sweep, MetricsSummary, SweepKind};
use perspfit::io::{load_sequence, read_json, save_sequence, write_json, GroundTruthFile, SequenceInput};
use perspfit::report::{write_sweep, Report};
use perspfit::synth::generate_synthetic;
use perspfit::{PipelineError, Result};
use perspfit_core::body::{JointMapping, KinematicTree};
use perspfit_core::fitting::{CameraCenterMode, ProjectionMode};
use perspfit_core::metrics::MetricsReport;
use perspfit_core::smoothing::smooth_sequence;

/// Fit a 3D body model to 2D keypoints under a full-perspective camera.
#[derive(Debug, Parser)]
#[command(name = "perspfit", version)]
struct Cli {
    /// More log output; repeat for debug detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit every frame of a sequence and write a report.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Score a report's predictions against ground truth.
    Eval {
        /// `report.json` written by `fit` or `smooth`.
        report: PathBuf,
        /// Ground-truth file.
        #[arg(long)]
        gt: PathBuf,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Generate a synthetic sequence with exact ground truth.
    Synth {
        /// Number of frames; overrides the configuration.
        #[arg(long)]
        frames: Option<usize>,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Refit a sequence once per swept setting.
    Sweep {
        #[arg(value_enum)]
        kind: SweepArg,
        #[command(flatten)]
        input: InputArgs,
        /// Sweep a synthetic sequence generated from the configuration.
        #[arg(long, conflicts_with_all = ["input", "keypoints", "init", "gt"])]
        synthetic: bool,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Apply temporal smoothing to the raw fits of a report.
    Smooth {
        report: PathBuf,
        /// Ground truth for rescoring the smoothed predictions.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[command(flatten)]
        opts: RunArgs,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Directory holding `keypoints/`, `init.json` and optionally
    /// `ground_truth.json`, as written by `synth`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Keypoint document or directory of per-frame documents.
    #[arg(long)]
    keypoints: Option<PathBuf>,
    /// Initialization sidecar.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Ground-truth file.
    #[arg(long)]
    gt: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Focal length in pixels.
    #[arg(long)]
    focal: Option<f64>,
    /// Iterations per fitting stage.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, value_enum)]
    projection: Option<ProjectionArg>,
    #[arg(long, value_enum)]
    camera_center: Option<CenterArg>,
    #[arg(long)]
    no_smoothing: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProjectionArg {
    Full,
    Weak,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CenterArg {
    Image,
    Bbox,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepArg {
    Focal,
    Iterations,
    CameraCenter,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(pixels) = self.focal {
            cfg.focal = FocalSource::Explicit { pixels };
            cfg.fit.focal_override = None;
        }
        if let Some(n) = self.iterations {
            cfg.fit.iterations = n;
        }
        if let Some(p) = self.projection {
            cfg.fit.projection = match p {
                ProjectionArg::Full => ProjectionMode::Full,
                ProjectionArg::Weak => ProjectionMode::Weak,
            };
        }
        if let Some(c) = self.camera_center {
            cfg.fit.camera_center_mode = match c {
                CenterArg::Image => CameraCenterMode::ImageCenter,
                CenterArg::Bbox => CameraCenterMode::BboxCenter,
            };
        }
        if self.no_smoothing {
            cfg.smoothing_enabled = false;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.synthetic.seed = seed;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl InputArgs {
    fn load(&self, cfg: &RunConfig) -> Result<SequenceInput> {
        let dir = self.input.as_deref();
        let pick = |explicit: &Option<PathBuf>, name: &str| explicit.clone().or_else(|| dir.map(|d| d.join(name)));
        let missing = |what: &str| PipelineError::Config(format!("no {what} given; pass --input or --{what}"));
        let keypoints = pick(&self.keypoints, "keypoints").ok_or_else(|| missing("keypoints"))?;
        let init = pick(&self.init, "init.json").ok_or_else(|| missing("init"))?;
        let gt = self.gt.clone().or_else(|| dir.map(|d| d.join("ground_truth.json")).filter(|p| p.exists()));
        load_sequence(&keypoints, &init, gt.as_deref(), cfg.tracking, cfg.smoothing.nominal_rate)
    }
}

fn fixtures() -> (KinematicTree, JointMapping) {
    (KinematicTree::default_template(), JointMapping::default_body25())
}

fn print_metrics(label: &str, m: &MetricsReport) {
    println!(
        "{label}: MPJPE {:.2} mm, MPJPE_PA {:.2} mm, PCK {:.2}%, AUC {:.3}, MPJAE {:.2} deg, MPJAE_PA {:.2} deg ({} frames)",
        m.mpjpe, m.mpjpe_pa, m.pck, m.auc, m.mpjae, m.mpjae_pa, m.frames
    );
}

fn fit(input: &InputArgs, opts: &RunArgs) -> Result<i32> {
    let cfg = opts.config()?;
    let seq = input.load(&cfg)?;
    let (tree, mapping) = fixtures();
    let out = run_fit(&seq, &tree, &mapping, &cfg)?;
    let report = Report::from_run(&seq.source, &cfg, &out);
    report.save(&opts.out)?;
    println!("fitted {} of {} frames, report in {}", seq.frames.len() - report.unfittable_frames, seq.frames.len(), opts.out.display());
    if let Some(m) = &report.metrics {
        print_metrics("metrics", m);
    }
    Ok(if report.unfittable_frames > 0 { EXIT_UNFITTABLE } else { EXIT_OK })
}

fn ground_truth_for(report: &Report, gt_path: &Path) -> Result<Vec<perspfit::io::SkeletonFrame>> {
    let gt: GroundTruthFile = read_json(gt_path)?;
    let by_index: HashMap<u64, _> = gt.frames.into_iter().map(|f| (f.frame_index, f)).collect();
    report
        .frames
        .iter()
        .map(|f| {
            by_index
                .get(&f.frame_index)
                .cloned()
                .ok_or_else(|| PipelineError::parse(gt_path, None, format!("no ground truth for frame {}", f.frame_index)))
        })
        .collect()
}

fn eval(report_path: &Path, gt_path: &Path, opts: &RunArgs) -> Result<i32> {
    opts.config()?;
    let report = Report::load(report_path)?;
    let gt = ground_truth_for(&report, gt_path)?;
    let metrics = evaluate_predictions(&report.final_skeletons()?, &gt)?;
    write_json(&opts.out.join("metrics.json"), &metrics)?;
    print_metrics("metrics", &metrics);
    Ok(if report.unfittable_frames > 0 { EXIT_UNFITTABLE } else { EXIT_OK })
}

fn synth(frames: Option<usize>, opts: &RunArgs) -> Result<i32> {
    let mut cfg = opts.config()?;
    if let Some(n) = frames {
        cfg.synthetic.frames = n;
    }
    cfg.synthetic.validate()?;
    let (tree, mapping) = fixtures();
    let scene = generate_synthetic(&cfg.synthetic, &tree, &mapping)?;
    save_sequence(&scene.sequence, &opts.out)?;
    write_json(&opts.out.join("camera.json"), &scene.intrinsics)?;
    println!("wrote {} frames to {}", scene.sequence.frames.len(), opts.out.display());
    Ok(EXIT_OK)
}

fn sweep(kind: SweepArg, input: &InputArgs, synthetic: bool, opts: &RunArgs) -> Result<i32> {
    let cfg = opts.config()?;
    let (tree, mapping) = fixtures();
    let seq = if synthetic {
        generate_synthetic(&cfg.synthetic, &tree, &mapping)?.sequence
    } else {
        input.load(&cfg)?
    };
    let kind = match kind {
        SweepArg::Focal => SweepKind::Focal,
        SweepArg::Iterations => SweepKind::Iterations,
        SweepArg::CameraCenter => SweepKind::CameraCenter,
    };
    let table = run_sweep(&seq, &tree, &mapping, &cfg, kind)?;
    write_sweep(&table, &opts.out)?;
    println!("{:>14} {:>9} {:>9} {:>7} {:>6} {:>7} {:>8}", "setting", "MPJPE", "MPJPE_PA", "PCK", "AUC", "MPJAE", "MPJAE_PA");
    for row in &table.rows {
        let MetricsSummary { mpjpe, mpjpe_pa, pck, auc, mpjae, mpjae_pa } = row.metrics;
        println!("{:>14} {mpjpe:>9.2} {mpjpe_pa:>9.2} {pck:>7.2} {auc:>6.3} {mpjae:>7.2} {mpjae_pa:>8.2}", row.label);
    }
    let unfittable = table.rows.iter().any(|r| r.unfittable > 0);
    Ok(if unfittable { EXIT_UNFITTABLE } else { EXIT_OK })
}

fn smooth(report_path: &Path, gt_path: Option<&Path>, opts: &RunArgs) -> Result<i32> {
    let cfg = opts.config()?;
    let mut report = Report::load(report_path)?;
    let raw = report.raw_skeletons()?;
    let smoothed = smooth_sequence(&raw, &cfg.smoothing)?;
    report.set_smoothed(&smoothed);
    report.config.smoothing = cfg.smoothing;
    report.config.smoothing_enabled = true;
    match gt_path {
        Some(path) => {
            let gt = ground_truth_for(&report, path)?;
            report.metrics_unsmoothed = Some(evaluate_predictions(&raw, &gt)?);
            report.metrics = Some(evaluate_predictions(&smoothed, &gt)?);
        }
        // Metrics of the earlier predictions no longer describe the report.
        None => {
            report.metrics = None;
            report.metrics_unsmoothed = None;
        }
    }
    report.save(&opts.out)?;
    if let (Some(before), Some(after)) = (&report.metrics_unsmoothed, &report.metrics) {
        print_metrics("raw", before);
        print_metrics("smoothed", after);
    }
    println!("smoothed report in {}", opts.out.display());
    Ok(if report.unfittable_frames > 0 { EXIT_UNFITTABLE } else { EXIT_OK })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { EXIT_OK as u8 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Fit { input, opts } => fit(input, opts),
        Command::Eval { report, gt, opts } => eval(report, gt, opts),
        Command::Synth { frames, opts } => synth(*frames, opts),
        Command::Sweep { kind, input, synthetic, opts } => sweep(*kind, input, *synthetic, opts),
        Command::Smooth { report, gt, opts } => smooth(report, gt.as_deref(), opts),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
