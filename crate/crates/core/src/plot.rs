//! SVG figures for the benchmark report: FRF magnitude and step responses.

use std::path::Path;

use plotters::prelude::*;

use crate::bench::{BenchmarkReport, FrfPoint, StepTrace};
use crate::error::{Error, Result};

const COLORS: [RGBColor; 4] = [
    BLACK,
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
];

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn series_frf(rep: &BenchmarkReport) -> Vec<(String, &[FrfPoint])> {
    let mut v = vec![("FOM".to_string(), rep.fom.frf.as_slice())];
    v.extend(
        rep.methods
            .iter()
            .map(|r| (r.method.name().to_string(), r.frf.as_slice())),
    );
    v
}

fn series_step(rep: &BenchmarkReport) -> Vec<(String, &StepTrace)> {
    let mut v = vec![("FOM".to_string(), &rep.fom.step)];
    v.extend(
        rep.methods
            .iter()
            .map(|r| (r.method.name().to_string(), &r.step)),
    );
    v
}

pub fn frf_plot(path: &Path, rep: &BenchmarkReport) -> Result<()> {
    let series = series_frf(rep);
    let finite = |p: &&FrfPoint| p.mag.is_finite() && p.mag > 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (_, s) in &series {
        for p in s.iter().filter(finite) {
            lo = lo.min(p.mag);
            hi = hi.max(p.mag);
        }
    }
    let (f0, f1) = match series[0].1 {
        [first, .., last] => (first.hz, last.hz),
        _ => return Ok(()),
    };
    if !(hi > 0.0) {
        return Ok(());
    }
    let root = SVGBackend::new(path, (900, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d((f0..f1).log_scale(), (lo * 0.5..hi * 2.0).log_scale())
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("frequency [Hz]")
        .y_desc("|G| [m/(Ns)]")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    for (k, (name, s)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        chart
            .draw_series(LineSeries::new(
                s.iter().filter(finite).map(|p| (p.hz, p.mag)),
                color.stroke_width(2),
            ))
            .map_err(|e| plot_err(path, e))?
            .label(name.as_str())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}

/// Step responses clipped to ten times the full-order peak so that a
/// diverging model does not flatten the others.
pub fn step_plot(path: &Path, rep: &BenchmarkReport) -> Result<()> {
    let series = series_step(rep);
    let peak = rep.fom.step.peak().max(f64::MIN_POSITIVE);
    let clip = 10.0 * peak;
    let t_end = rep.fom.step.t.last().copied().unwrap_or(1.0);
    let root = SVGBackend::new(path, (900, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(16)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0.0..t_end, -1.5 * peak..1.5 * peak)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .y_desc("y [m/s]")
        .draw()
        .map_err(|e| plot_err(path, e))?;
    for (k, (name, s)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts =
            s.t.iter()
                .zip(&s.y)
                .take_while(|(_, y)| y.abs() <= clip)
                .map(|(t, y)| (*t, y.clamp(-1.5 * peak, 1.5 * peak)));
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(1)))
            .map_err(|e| plot_err(path, e))?
            .label(name.as_str())
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}
