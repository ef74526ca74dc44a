//! Static SVG panels: position vs command, Euler angles with bounds,
//! estimates with true values, forgetting factor, and inputs with bounds.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::scenario::Scenario;
use super::trace::Trace;
use crate::error::OutputError;
use crate::linear_model::LinearHoverModel;

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    color: RGBColor,
    dashed: bool,
}

struct Panel {
    title: String,
    series: Vec<Series>,
}

const MEASURED: RGBColor = RGBColor(31, 119, 180);
const REFERENCE: RGBColor = RGBColor(214, 39, 40);
const BOUND: RGBColor = RGBColor(90, 90, 90);

fn line(label: &str, points: Vec<(f64, f64)>, color: RGBColor) -> Series {
    Series {
        label: label.into(),
        points,
        color,
        dashed: false,
    }
}

fn dashed(label: &str, points: Vec<(f64, f64)>, color: RGBColor) -> Series {
    Series {
        dashed: true,
        ..line(label, points, color)
    }
}

fn render(path: &Path, panels: &[Panel], columns: usize) -> Result<(), Box<dyn std::error::Error>> {
    let rows = panels.len().div_ceil(columns);
    let root = SVGBackend::new(path, (420 * columns as u32, 240 * rows as u32)).into_drawing_area();
    root.fill(&WHITE)?;
    let areas = root.split_evenly((rows, columns));
    for (panel, area) in panels.iter().zip(areas.iter()) {
        let (mut t_min, mut t_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &panel.series {
            for &(t, y) in &s.points {
                if t.is_finite() && y.is_finite() {
                    t_min = t_min.min(t);
                    t_max = t_max.max(t);
                    y_min = y_min.min(y);
                    y_max = y_max.max(y);
                }
            }
        }
        if !(t_min < t_max) {
            t_max = t_min + 1.0;
        }
        let pad = ((y_max - y_min) * 0.05).max(1e-6);
        let mut chart = ChartBuilder::on(area)
            .caption(&panel.title, ("sans-serif", 14))
            .margin(6)
            .x_label_area_size(24)
            .y_label_area_size(52)
            .build_cartesian_2d(t_min..t_max, (y_min - pad)..(y_max + pad))?;
        chart
            .configure_mesh()
            .x_desc("t [s]")
            .light_line_style(WHITE)
            .label_style(("sans-serif", 10))
            .draw()?;
        for s in &panel.series {
            let style = ShapeStyle::from(&s.color).stroke_width(1);
            let drawn = if s.dashed {
                chart.draw_series(DashedLineSeries::new(s.points.iter().copied(), 5, 4, style))?
            } else {
                chart.draw_series(LineSeries::new(s.points.iter().copied(), style))?
            };
            if !s.label.is_empty() {
                drawn
                    .label(s.label.clone())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 14, y)], style));
            }
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .label_font(("sans-serif", 10))
            .draw()?;
    }
    root.present()?;
    Ok(())
}

/// Writes the five panel groups as `<name>_<group>.svg` in `dir`.
pub fn write_panels(trace: &Trace, scenario: &Scenario, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let ts = scenario.sample_time;
    let times: Vec<f64> = trace.records.iter().map(|r| r.t).collect();
    let series = |f: &dyn Fn(&super::TraceRecord) -> f64| -> Vec<(f64, f64)> {
        trace.records.iter().map(|r| (r.t, f(r))).collect()
    };
    let constant = |v: f64| -> Vec<(f64, f64)> {
        vec![(times[0], v), (*times.last().expect("nonempty"), v)]
    };
    let tick = |t: f64| (t / ts).round() as usize;

    let mut groups: Vec<(&str, Vec<Panel>, usize)> = Vec::new();

    let axes = ["p1", "p2", "p3"];
    groups.push((
        "position",
        (0..3)
            .map(|i| Panel {
                title: format!("{} [m]", axes[i]),
                series: vec![
                    line(axes[i], series(&|r| r.state[i]), MEASURED),
                    dashed(
                        "command",
                        series(&|r| scenario.command.reference(r.t)[i]),
                        REFERENCE,
                    ),
                ],
            })
            .collect(),
        1,
    ));

    let names = ["psi", "phi", "theta"];
    groups.push((
        "angles",
        (0..3)
            .map(|j| {
                let bound = scenario.controller.xi_max[j];
                Panel {
                    title: format!("{} [rad]", names[j]),
                    series: vec![
                        line(names[j], series(&|r| r.state[3 + j]), MEASURED),
                        dashed("bound", constant(bound), BOUND),
                        dashed("", constant(-bound), BOUND),
                    ],
                }
            })
            .collect(),
        1,
    ));

    let nominal = scenario.vehicle_params();
    let truth: Vec<_> = times
        .iter()
        .map(|&t| {
            LinearHoverModel::new(&nominal.with_mass(scenario.mass_at_tick(tick(t))), ts).true_theta()
        })
        .collect();
    groups.push((
        "theta",
        (0..12)
            .map(|i| Panel {
                title: format!("th{}", i + 1),
                series: vec![
                    line("estimate", series(&|r| r.theta.0[i]), MEASURED),
                    dashed(
                        "true",
                        times.iter().zip(&truth).map(|(&t, th)| (t, th.0[i])).collect(),
                        REFERENCE,
                    ),
                ],
            })
            .collect(),
        3,
    ));

    groups.push((
        "lambda",
        vec![Panel {
            title: "forgetting factor".into(),
            series: vec![line("lambda", series(&|r| r.lambda), MEASURED)],
        }],
        1,
    ));

    let cfg = scenario.pcac_config();
    let input_names = ["f [N]", "tau1 [N m]", "tau2 [N m]", "tau3 [N m]"];
    groups.push((
        "inputs",
        (0..4)
            .map(|j| {
                let offset = |t: f64| {
                    if j == 0 {
                        scenario.thrust_feedforward_at_tick(tick(t))
                    } else {
                        0.0
                    }
                };
                Panel {
                    title: input_names[j].into(),
                    series: vec![
                        line("applied", series(&|r| r.input[j]), MEASURED),
                        dashed("bound", times.iter().map(|&t| (t, offset(t) + cfg.u_max[j])).collect(), BOUND),
                        dashed("", times.iter().map(|&t| (t, offset(t) + cfg.u_min[j])).collect(), BOUND),
                    ],
                }
            })
            .collect(),
        2,
    ));

    let mut written = Vec::new();
    for (group, panels, columns) in groups {
        let path = dir.join(format!("{}_{group}.svg", scenario.name));
        render(&path, &panels, columns).map_err(|e| OutputError::Write {
            path: path.clone(),
            message: e.to_string(),
        })?;
        written.push(path);
    }
    Ok(written)
}
