//! SVG figures for runs and sweeps.

use layercon::constraints::HPolytope;
use layercon::sim::{SweepRow, TraceLog};
use plotters::prelude::*;

use crate::scenario::Loaded;

const SIZE: (u32, u32) = (800, 600);
const FONT: (&str, u32) = ("sans-serif", 18);

type PlotResult = Result<(), Box<dyn std::error::Error>>;

fn span(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let w = (hi - lo).max(1e-9);
    (lo - pad * w, hi + pad * w)
}

/// Corners of a 2-D piece in counter-clockwise order.
fn outline(p: &HPolytope<f64>) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = p.vertices().iter().map(|x| (x[0], x[1])).collect();
    let n = v.len().max(1) as f64;
    let (cx, cy) = v.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    v.sort_by(|a, b| {
        let ta = (a.1 - cy).atan2(a.0 - cx);
        let tb = (b.1 - cy).atan2(b.0 - cx);
        ta.total_cmp(&tb)
    });
    v
}

/// Output paths over the safe region (planar outputs), or outputs against
/// time otherwise. Low-level output excursions are marked.
pub fn trajectory_svg(sc: &Loaded, log: &TraceLog<f64>) -> Result<String, String> {
    let mut s = String::new();
    let res: PlotResult = (|| {
        let root = SVGBackend::with_string(&mut s, SIZE).into_drawing_area();
        root.fill(&WHITE)?;
        if sc.lower.n_outputs() == 2 {
            let shapes: Vec<Vec<(f64, f64)>> = sc.y_pieces.iter().map(outline).collect();
            let xs = shapes.iter().flatten().map(|p| p.0).chain(log.low.iter().map(|r| r.y[0]));
            let ys = shapes.iter().flatten().map(|p| p.1).chain(log.low.iter().map(|r| r.y[1]));
            let (x0, x1) = span(xs, 0.05);
            let (y0, y1) = span(ys, 0.05);
            let mut chart = ChartBuilder::on(&root)
                .caption(format!("{}: output trajectories", sc.spec.name), FONT)
                .margin(10)
                .x_label_area_size(40)
                .y_label_area_size(50)
                .build_cartesian_2d(x0..x1, y0..y1)?;
            chart.configure_mesh().x_desc("y1").y_desc("y2").draw()?;
            for shape in &shapes {
                chart.draw_series(std::iter::once(Polygon::new(shape.clone(), RGBColor(220, 230, 245).filled())))?;
            }
            let goal = &sc.mission.goal_center;
            let r = sc.mission.goal_radius;
            let circle: Vec<(f64, f64)> = (0..=64)
                .map(|k| {
                    let a = k as f64 / 64.0 * std::f64::consts::TAU;
                    (goal[0] + r * a.cos(), goal[1] + r * a.sin())
                })
                .collect();
            chart.draw_series(LineSeries::new(circle, GREEN.stroke_width(2)))?.label("goal");
            chart
                .draw_series(LineSeries::new(log.low.iter().map(|r| (r.ybar[0], r.ybar[1])), BLUE.stroke_width(2)))?
                .label("higher layer")
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
            chart
                .draw_series(LineSeries::new(log.low.iter().map(|r| (r.y[0], r.y[1])), RED))?
                .label("lower layer")
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
            chart.draw_series(
                sc.mission
                    .waypoints
                    .iter()
                    .map(|w| Cross::new((w[0], w[1]), 5, BLACK.stroke_width(2))),
            )?;
            chart.draw_series(
                log.low
                    .iter()
                    .filter(|r| !r.y_in_y)
                    .map(|r| Circle::new((r.y[0], r.y[1]), 4, MAGENTA.filled())),
            )?;
            chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        } else {
            let (t0, t1) = span(log.low.iter().map(|r| r.t), 0.0);
            let (y0, y1) = span(log.low.iter().flat_map(|r| r.y.iter().chain(r.ybar.iter()).copied().collect::<Vec<_>>()), 0.1);
            let mut chart = ChartBuilder::on(&root)
                .caption(format!("{}: outputs", sc.spec.name), FONT)
                .margin(10)
                .x_label_area_size(40)
                .y_label_area_size(50)
                .build_cartesian_2d(t0..t1, y0..y1)?;
            chart.configure_mesh().x_desc("t [s]").y_desc("output").draw()?;
            for i in 0..sc.lower.n_outputs() {
                chart.draw_series(LineSeries::new(log.low.iter().map(|r| (r.t, r.ybar[i])), BLUE.stroke_width(2)))?;
                chart.draw_series(LineSeries::new(log.low.iter().map(|r| (r.t, r.y[i])), RED))?;
            }
        }
        root.present()?;
        Ok(())
    })();
    res.map_err(|e| e.to_string())?;
    Ok(s)
}

/// `‖ȳ − y‖` against time with the `ε` line.
pub fn distance_svg(log: &TraceLog<f64>) -> Result<String, String> {
    let mut s = String::new();
    let res: PlotResult = (|| {
        let root = SVGBackend::with_string(&mut s, SIZE).into_drawing_area();
        root.fill(&WHITE)?;
        let (t0, t1) = span(log.low.iter().map(|r| r.t), 0.0);
        let top = log.low.iter().map(|r| r.dist).fold(log.epsilon, f64::max).max(1e-6) * 1.15;
        let mut chart = ChartBuilder::on(&root)
            .caption("output distance", FONT)
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(t0..t1.max(t0 + 1e-9), 0.0..top)?;
        chart.configure_mesh().x_desc("t [s]").y_desc("distance").draw()?;
        chart
            .draw_series(LineSeries::new(log.low.iter().map(|r| (r.t, r.dist)), BLUE.stroke_width(2)))?
            .label("distance")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
        chart
            .draw_series(LineSeries::new(vec![(t0, log.epsilon), (t1, log.epsilon)], RED.stroke_width(2)))?
            .label("epsilon")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        root.present()?;
        Ok(())
    })();
    res.map_err(|e| e.to_string())?;
    Ok(s)
}

const PALETTE: [RGBColor; 4] = [BLUE, RED, GREEN, MAGENTA];

/// Lower-layer input components with the box bounds of `U` when it is a box.
pub fn inputs_svg(log: &TraceLog<f64>, bounds: Option<(&[f64], &[f64])>) -> Result<String, String> {
    let mut s = String::new();
    let res: PlotResult = (|| {
        let root = SVGBackend::with_string(&mut s, SIZE).into_drawing_area();
        root.fill(&WHITE)?;
        let (t0, t1) = span(log.low.iter().map(|r| r.t), 0.0);
        let mut vals: Vec<f64> = log.low.iter().flat_map(|r| r.u.iter().copied().collect::<Vec<_>>()).collect();
        if let Some((lo, hi)) = bounds {
            vals.extend(lo.iter().chain(hi.iter()));
        }
        let (y0, y1) = span(vals.into_iter(), 0.1);
        let mut chart = ChartBuilder::on(&root)
            .caption("lower-layer inputs", FONT)
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(t0..t1.max(t0 + 1e-9), y0..y1)?;
        chart.configure_mesh().x_desc("t [s]").y_desc("u").draw()?;
        let m = log.low.first().map_or(0, |r| r.u.len());
        for i in 0..m {
            let c = PALETTE[i % PALETTE.len()];
            chart
                .draw_series(LineSeries::new(log.low.iter().map(|r| (r.t, r.u[i])), c.stroke_width(2)))?
                .label(format!("u{i}"))
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
            if let Some((lo, hi)) = bounds {
                for b in [lo[i], hi[i]] {
                    chart.draw_series(LineSeries::new(vec![(t0, b), (t1, b)], c.mix(0.5)))?;
                }
            }
        }
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        root.present()?;
        Ok(())
    })();
    res.map_err(|e| e.to_string())?;
    Ok(s)
}

/// `ε` (left axis) and `ū_max` (right axis) against tracking frequency.
pub fn sweep_svg(rows: &[SweepRow<f64>]) -> Result<String, String> {
    let mut s = String::new();
    let res: PlotResult = (|| {
        let root = SVGBackend::with_string(&mut s, SIZE).into_drawing_area();
        root.fill(&WHITE)?;
        let (f0, f1) = span(rows.iter().map(|r| r.freq_hz), 0.05);
        let eps: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.epsilon.map(|e| (r.freq_hz, e))).collect();
        let ub: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.u_bar_max.map(|u| (r.freq_hz, u))).collect();
        let e_top = eps.iter().map(|p| p.1).fold(1e-9, f64::max) * 1.1;
        let u_top = ub.iter().map(|p| p.1).fold(1e-9, f64::max) * 1.1;
        let mut chart = ChartBuilder::on(&root)
            .caption("tracking precision and input bound against frequency", FONT)
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .right_y_label_area_size(60)
            .build_cartesian_2d(f0..f1, 0.0..e_top)?
            .set_secondary_coord(f0..f1, 0.0..u_top);
        chart.configure_mesh().x_desc("1/T_L [Hz]").y_desc("epsilon").draw()?;
        chart.configure_secondary_axes().y_desc("u_bar_max").draw()?;
        chart
            .draw_series(LineSeries::new(eps.clone(), BLUE.stroke_width(2)))?
            .label("epsilon")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
        chart.draw_series(eps.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))?;
        chart
            .draw_secondary_series(LineSeries::new(ub.clone(), RED.stroke_width(2)))?
            .label("u_bar_max")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
        chart.draw_secondary_series(ub.iter().map(|&p| Circle::new(p, 4, RED.filled())))?;
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw()?;
        root.present()?;
        Ok(())
    })();
    res.map_err(|e| e.to_string())?;
    Ok(s)
}
