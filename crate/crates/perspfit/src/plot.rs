use std::path::Path;

use plotters::prelude::*;

use crate::error::{PipelineError, Result};
use crate::harness::{SweepKind, SweepTable};

fn metric_value(m: &crate::harness::MetricsSummary, metric: &str) -> Option<f64> {
    Some(match metric {
        "mpjpe" => m.mpjpe,
        "mpjpe_pa" => m.mpjpe_pa,
        "pck" => m.pck,
        "auc" => m.auc,
        "mpjae" => m.mpjae,
        "mpjae_pa" => m.mpjae_pa,
        _ => return None,
    })
}

fn unit(metric: &str) -> &'static str {
    match metric {
        "mpjpe" | "mpjpe_pa" => "mm",
        "mpjae" | "mpjae_pa" => "deg",
        "pck" => "%",
        _ => "",
    }
}

/// Line plot of one metric against the swept value. Focal factors are
/// plotted on a log₂ axis.
pub fn plot_sweep(table: &SweepTable, metric: &str, path: &Path) -> Result<()> {
    let plot_err = |e: &dyn std::fmt::Display| PipelineError::Plot(format!("{}: {e}", path.display()));
    let (x_label, to_x): (&str, fn(f64) -> f64) = match table.kind {
        SweepKind::Focal => ("log2(focal / reference focal)", f64::log2),
        SweepKind::Iterations => ("iterations per stage", |v| v),
        SweepKind::CameraCenter => ("camera center (0 = bbox, 1 = image)", |v| v),
    };
    let points = table
        .rows
        .iter()
        .map(|r| metric_value(&r.metrics, metric).map(|y| (to_x(r.value), y)))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| plot_err(&format!("unknown metric {metric}")))?;
    if points.is_empty() {
        return Err(plot_err(&"no sweep rows to plot"));
    }
    let (mut x0, mut x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 - x0 < 1e-9 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let pad = ((y1 - y0) * 0.1).max(1e-6);
    y0 -= pad;
    y1 += pad;

    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| PipelineError::Write {
            path: path.to_path_buf(),
            source,
        })?;
    }
    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| plot_err(&e))?;
    let y_desc = format!("{metric} {}", unit(metric));
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_desc.trim_end())
        .draw()
        .map_err(|e| plot_err(&e))?;
    chart
        .draw_series(LineSeries::new(points.iter().copied(), &BLUE))
        .map_err(|e| plot_err(&e))?;
    chart
        .draw_series(points.iter().map(|&p| Circle::new(p, 3, BLUE.filled())))
        .map_err(|e| plot_err(&e))?;
    root.present().map_err(|e| plot_err(&e))?;
    Ok(())
}
