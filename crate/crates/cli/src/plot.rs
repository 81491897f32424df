//! Static SVG figures for simulation runs.

use std::path::Path;

use plotters::prelude::*;
use stt_core::sim::TrajectoryLog;
use stt_core::task::{Hyperbox, RasTask};
use stt_core::tube::Tube;

const TUBE_SAMPLES: usize = 400;
const MAX_POINTS: usize = 1000;
const OBSTACLE_SNAPSHOTS: usize = 6;

type DrawResult<T> = Result<T, Box<dyn std::error::Error>>;

fn thin<T: Copy>(points: &[T]) -> Vec<T> {
    let step = points.len().div_ceil(MAX_POINTS).max(1);
    let mut out: Vec<T> = points.iter().step_by(step).copied().collect();
    if let Some(&last) = points.last() {
        if (points.len() - 1) % step != 0 {
            out.push(last);
        }
    }
    out
}

fn padded(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let pad = 0.05 * (hi - lo).max(1e-9);
    (lo - pad)..(hi + pad)
}

fn trace_color(k: usize) -> RGBColor {
    let (r, g, b) = Palette99::pick(k).rgb();
    RGBColor(r, g, b)
}

/// Output trajectories over the tube band, one panel per output dimension.
pub fn draw_bands(path: &Path, tube: &Tube, logs: &[TrajectoryLog]) -> DrawResult<()> {
    let n = tube.dim();
    let root = SVGBackend::new(path, (900, 280 * n as u32)).into_drawing_area();
    root.fill(&WHITE)?;
    let times: Vec<f64> = (0..=TUBE_SAMPLES).map(|k| tube.horizon * k as f64 / TUBE_SAMPLES as f64).collect();
    for (i, area) in root.split_evenly((n, 1)).iter().enumerate() {
        let lower: Vec<(f64, f64)> = times.iter().map(|&t| (t, tube.lower[i].eval(t))).collect();
        let upper: Vec<(f64, f64)> = times.iter().map(|&t| (t, tube.upper[i].eval(t))).collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(_, v) in lower.iter().chain(&upper) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        for log in logs {
            for y in &log.outputs {
                if y[i].is_finite() {
                    lo = lo.min(y[i]);
                    hi = hi.max(y[i]);
                }
            }
        }
        let mut chart = ChartBuilder::on(area)
            .margin(10)
            .caption(format!("output {}", i + 1), ("sans-serif", 16))
            .x_label_area_size(30)
            .y_label_area_size(50)
            .build_cartesian_2d(0.0..tube.horizon, padded(lo, hi))?;
        chart.configure_mesh().x_desc("t").y_desc(format!("y_{}", i + 1)).draw()?;
        let mut band = lower.clone();
        band.extend(upper.iter().rev());
        chart.draw_series(std::iter::once(Polygon::new(band, BLUE.mix(0.15))))?;
        chart.draw_series(LineSeries::new(lower, BLUE.stroke_width(1)))?;
        chart.draw_series(LineSeries::new(upper, BLUE.stroke_width(1)))?;
        for (k, log) in logs.iter().enumerate() {
            let pts: Vec<(f64, f64)> = log.time.iter().zip(&log.outputs).map(|(&t, y)| (t, y[i])).collect();
            chart.draw_series(LineSeries::new(thin(&pts), trace_color(k).stroke_width(1)))?;
        }
    }
    root.present()?;
    Ok(())
}

fn outline(b: &Hyperbox, a: usize, c: usize) -> [(f64, f64); 5] {
    let (x0, x1, y0, y1) = (b.lower[a], b.upper[a], b.lower[c], b.upper[c]);
    [(x0, y0), (x1, y0), (x1, y1), (x0, y1), (x0, y0)]
}

/// Paths in the workspace with obstacle, start, target and tube outlines.
/// Three-dimensional tasks get the three coordinate-plane projections.
pub fn draw_paths(path: &Path, tube: &Tube, task: &RasTask, logs: &[TrajectoryLog]) -> DrawResult<()> {
    let n = task.dim();
    let planes: Vec<(usize, usize)> = match n {
        1 => return Ok(()),
        2 => vec![(0, 1)],
        _ => vec![(0, 1), (0, 2), (1, 2)],
    };
    let root = SVGBackend::new(path, (520 * planes.len() as u32, 520)).into_drawing_area();
    root.fill(&WHITE)?;
    for (area, &(a, c)) in root.split_evenly((1, planes.len())).iter().zip(&planes) {
        let ws = &task.workspace;
        let mut chart = ChartBuilder::on(area)
            .margin(10)
            .caption(format!("y_{} vs y_{}", c + 1, a + 1), ("sans-serif", 16))
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d(padded(ws.lower[a], ws.upper[a]), padded(ws.lower[c], ws.upper[c]))?;
        chart.configure_mesh().x_desc(format!("y_{}", a + 1)).y_desc(format!("y_{}", c + 1)).draw()?;
        chart.draw_series(std::iter::once(PathElement::new(outline(ws, a, c).to_vec(), BLACK)))?;
        for piece in &task.unsafe_set.pieces {
            let [t0, t1] = piece.active;
            let snapshots = if piece.region.is_static() { 1 } else { OBSTACLE_SNAPSHOTS };
            for s in 0..snapshots {
                let t = if snapshots == 1 { t0 } else { t0 + (t1 - t0) * s as f64 / (snapshots - 1) as f64 };
                let b = piece.region.at(t);
                let corners = outline(&b, a, c);
                chart.draw_series(std::iter::once(Polygon::new(corners[..4].to_vec(), RED.mix(0.12))))?;
                chart.draw_series(std::iter::once(PathElement::new(corners.to_vec(), RED)))?;
            }
        }
        for k in 0..=10 {
            let b = tube.bounds_at(tube.horizon * k as f64 / 10.0);
            chart.draw_series(std::iter::once(PathElement::new(outline(&b, a, c).to_vec(), BLUE.mix(0.4))))?;
        }
        chart.draw_series(std::iter::once(PathElement::new(outline(&task.initial, a, c).to_vec(), GREEN.stroke_width(2))))?;
        chart.draw_series(std::iter::once(PathElement::new(outline(&task.target, a, c).to_vec(), MAGENTA.stroke_width(2))))?;
        for (k, log) in logs.iter().enumerate() {
            let pts: Vec<(f64, f64)> = log.outputs.iter().map(|y| (y[a], y[c])).collect();
            chart.draw_series(LineSeries::new(thin(&pts), trace_color(k).stroke_width(1)))?;
        }
    }
    root.present()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_keeps_endpoints() {
        let pts: Vec<usize> = (0..2501).collect();
        let t = thin(&pts);
        assert!(t.len() <= MAX_POINTS + 1);
        assert_eq!(t[0], 0);
        assert_eq!(*t.last().unwrap(), 2500);
        assert_eq!(thin(&[1, 2, 3]), vec![1, 2, 3]);
    }
}
