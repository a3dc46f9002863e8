//! The two figures: vertical trajectories and the mass estimate over time.

use std::path::Path;

use admittance_core::TraceRecord;
use plotters::prelude::*;

pub type PlotResult = Result<(), Box<dyn std::error::Error>>;

struct Series<'a> {
    label: &'a str,
    color: RGBColor,
    points: Vec<(f64, f64)>,
}

fn bounds(series: &[Series]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return ((0.0, 1.0), (0.0, 1.0));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6);
    ((x0, x1), (y0 - pad, y1 + pad))
}

fn line_chart(svg: &mut String, title: &str, y_label: &str, series: &[Series]) -> PlotResult {
    let ((x0, x1), (y0, y1)) = bounds(series);
    {
        let root = SVGBackend::with_string(svg, (900, 480)).into_drawing_area();
        root.fill(&WHITE)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(x0..x1, y0..y1)?;
        chart.configure_mesh().x_desc("t [s]").y_desc(y_label).draw()?;
        for s in series {
            let color = s.color;
            chart
                .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))?
                .label(s.label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()?;
        root.present()?;
    }
    Ok(())
}

/// Keeps at most ~2000 points per series so files stay small.
fn thin(trace: &[TraceRecord]) -> impl Iterator<Item = &TraceRecord> {
    let step = (trace.len() / 2000).max(1);
    trace.iter().step_by(step)
}

pub fn z_trajectory_svg(trace: &[TraceRecord]) -> Result<String, Box<dyn std::error::Error>> {
    let pick = |f: fn(&TraceRecord) -> f64| thin(trace).map(|r| (r.t, f(r))).collect::<Vec<_>>();
    let series = [
        Series {
            label: "actual p_z",
            color: RGBColor(31, 119, 180),
            points: pick(|r| r.p_true.z),
        },
        Series {
            label: "admittance p_a,z",
            color: RGBColor(255, 127, 14),
            points: pick(|r| r.p_a.z),
        },
        Series {
            label: "reference p_0,z",
            color: RGBColor(44, 160, 44),
            points: pick(|r| r.p_0.z),
        },
    ];
    let mut svg = String::new();
    line_chart(&mut svg, "Vertical position", "z [m]", &series)?;
    Ok(svg)
}

pub fn mass_estimate_svg(trace: &[TraceRecord]) -> Result<String, Box<dyn std::error::Error>> {
    let pick = |f: fn(&TraceRecord) -> f64| thin(trace).map(|r| (r.t, f(r))).collect::<Vec<_>>();
    let series = [
        Series {
            label: "estimate",
            color: RGBColor(31, 119, 180),
            points: pick(|r| r.m_u_hat),
        },
        Series {
            label: "applied",
            color: RGBColor(214, 39, 40),
            points: pick(|r| r.m_u_applied),
        },
    ];
    let mut svg = String::new();
    line_chart(&mut svg, "Payload mass estimate", "mass [kg]", &series)?;
    Ok(svg)
}

/// Writes `<prefix>z_trajectory.svg` and `<prefix>mass_estimate.svg` into `dir`.
pub fn write_plots(dir: &Path, prefix: &str, trace: &[TraceRecord]) -> PlotResult {
    std::fs::write(dir.join(format!("{prefix}z_trajectory.svg")), z_trajectory_svg(trace)?)?;
    std::fs::write(
        dir.join(format!("{prefix}mass_estimate.svg")),
        mass_estimate_svg(trace)?,
    )?;
    Ok(())
}
