//! Self-contained SVG charts of a trajectory log.

use std::fmt::Write as _;

use slipwalk::GaitParams;

use crate::csv::CsvRow;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// Desired and actual sagittal velocity over time.
    Velocity,
    /// Friction demand per axis with the pyramid bound.
    Rcof,
    /// Top view of footprints, ZMP and CoM paths.
    Footprint,
}

/// Extra information not carried by the CSV.
#[derive(Debug, Clone, Default)]
pub struct PlotContext {
    /// Commanded velocity per row, if known.
    pub desired_velocity: Option<Vec<f64>>,
    pub params: GaitParams,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f"];

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    /// `equal` forces one scale on both axes, for top-down geometry.
    fn new(x: (f64, f64), y: (f64, f64), equal: bool) -> Self {
        let widen = |(lo, hi): (f64, f64)| {
            if hi - lo < 1e-9 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (mut x, mut y) = (widen(x), widen(y));
        if equal {
            let (w, h) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
            let scale = ((x.1 - x.0) / w).max((y.1 - y.0) / h);
            let (cx, cy) = (0.5 * (x.0 + x.1), 0.5 * (y.0 + y.1));
            x = (cx - 0.5 * scale * w, cx + 0.5 * scale * w);
            y = (cy - 0.5 * scale * h, cy + 0.5 * scale * h);
        }
        Self { x, y }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    fn sx(&self, dx: f64) -> f64 {
        dx / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn sy(&self, dy: f64) -> f64 {
        dy / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn extent<'a>(values: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
    values
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|k| k * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        format!("{:.decimals$}", 0.0)
    } else {
        s
    }
}

struct Svg {
    body: String,
    frame: Frame,
}

impl Svg {
    fn new(title: &str, xlabel: &str, ylabel: &str, frame: Frame) -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(body, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            body,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#,
            WIDTH / 2.0
        );
        let _ = writeln!(
            body,
            r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 16.0
        );
        let _ = writeln!(
            body,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{ylabel}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0
        );
        let mut svg = Self { body, frame };
        svg.axes();
        svg
    }

    fn axes(&mut self) {
        let f = &self.frame;
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            self.body,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#000"/>"##,
            r - l,
            b - t
        );
        let step = nice_step(f.x.1 - f.x.0);
        let mut v = (f.x.0 / step).ceil() * step;
        while v <= f.x.1 {
            let x = f.px(v);
            let _ = writeln!(
                self.body,
                r##"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                b + 5.0,
                b + 18.0,
                label(v, step)
            );
            v += step;
        }
        let step = nice_step(f.y.1 - f.y.0);
        let mut v = (f.y.0 / step).ceil() * step;
        while v <= f.y.1 {
            let y = f.py(v);
            let _ = writeln!(
                self.body,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="#000"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                l - 5.0,
                l - 8.0,
                y + 4.0,
                label(v, step)
            );
            v += step;
        }
    }

    fn polyline(&mut self, xs: &[f64], ys: &[f64], color: &str, dashed: bool) {
        let points: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| format!("{:.2},{:.2}", self.frame.px(x), self.frame.py(y)))
            .collect();
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            points.join(" ")
        );
    }

    fn rect(&mut self, cx: f64, cy: f64, w: f64, h: f64, color: &str) {
        let f = &self.frame;
        let _ = writeln!(
            self.body,
            r#"<rect class="foot" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="{color}"/>"#,
            f.px(cx - 0.5 * w),
            f.py(cy + 0.5 * h),
            f.sx(w),
            f.sy(h)
        );
    }

    fn legend(&mut self, entries: &[(&str, &str)]) {
        for (k, (name, color)) in entries.iter().enumerate() {
            let y = MARGIN + 16.0 + 16.0 * k as f64;
            let x = WIDTH - MARGIN - 150.0;
            let _ = writeln!(
                self.body,
                r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{y:.2}">{name}</text>"#,
                y - 4.0,
                x + 20.0,
                y - 4.0,
                x + 26.0
            );
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Renders one chart. Fails on an empty log so no blank file is produced.
pub fn render(kind: PlotKind, rows: &[CsvRow], ctx: &PlotContext) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Validation("CSV has no data rows".into()));
    }
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let svg = match kind {
        PlotKind::Velocity => {
            let actual: Vec<f64> = rows.iter().map(|r| r.dx).collect();
            let mut ys = actual.clone();
            if let Some(d) = &ctx.desired_velocity {
                ys.extend(d);
            }
            let mut svg = Svg::new(
                "Walking velocity",
                "time (s)",
                "velocity (m/s)",
                Frame::new(extent(&t), extent(&ys), false),
            );
            let mut legend = vec![("actual", COLORS[0])];
            if let Some(d) = &ctx.desired_velocity {
                svg.polyline(&t, d, COLORS[3], true);
                legend.push(("desired", COLORS[3]));
            }
            svg.polyline(&t, &actual, COLORS[0], false);
            svg.legend(&legend);
            svg
        }
        PlotKind::Rcof => {
            let rx: Vec<f64> = rows.iter().map(|r| r.rcof_x).collect();
            let ry: Vec<f64> = rows.iter().map(|r| r.rcof_y).collect();
            let up: Vec<f64> = rows.iter().map(|r| r.mu_ap).collect();
            let down: Vec<f64> = up.iter().map(|v| -v).collect();
            let all: Vec<f64> = rx.iter().chain(&ry).chain(&up).chain(&down).copied().collect();
            let mut svg = Svg::new(
                "Required coefficient of friction",
                "time (s)",
                "RCoF",
                Frame::new(extent(&t), extent(&all), false),
            );
            svg.polyline(&t, &up, COLORS[3], true);
            svg.polyline(&t, &down, COLORS[3], true);
            svg.polyline(&t, &rx, COLORS[0], false);
            svg.polyline(&t, &ry, COLORS[1], false);
            svg.legend(&[("rcof_x", COLORS[0]), ("rcof_y", COLORS[1]), ("bound", COLORS[3])]);
            svg
        }
        PlotKind::Footprint => {
            let (a, b) = (ctx.params.foot_length, ctx.params.foot_width);
            let feet = footprints(rows);
            let xs: Vec<f64> = rows
                .iter()
                .flat_map(|r| [r.x, r.zx])
                .chain(feet.iter().flat_map(|f| [f.0 - a / 2.0, f.0 + a / 2.0]))
                .collect();
            let ys: Vec<f64> = rows
                .iter()
                .flat_map(|r| [r.y, r.zy])
                .chain(feet.iter().flat_map(|f| [f.1 - b / 2.0, f.1 + b / 2.0]))
                .collect();
            let mut svg = Svg::new(
                "Footsteps and ZMP",
                "x (m)",
                "y (m)",
                Frame::new(extent(&xs), extent(&ys), true),
            );
            for &(x, y, left) in &feet {
                svg.rect(x, y, a, b, if left { COLORS[2] } else { COLORS[3] });
            }
            let zx: Vec<f64> = rows.iter().map(|r| r.zx).collect();
            let zy: Vec<f64> = rows.iter().map(|r| r.zy).collect();
            let cx: Vec<f64> = rows.iter().map(|r| r.x).collect();
            let cy: Vec<f64> = rows.iter().map(|r| r.y).collect();
            svg.polyline(&zx, &zy, COLORS[1], false);
            svg.polyline(&cx, &cy, COLORS[0], false);
            svg.legend(&[
                ("CoM", COLORS[0]),
                ("ZMP", COLORS[1]),
                ("left foot", COLORS[2]),
                ("right foot", COLORS[3]),
            ]);
            svg
        }
    };
    Ok(svg.finish())
}

/// Distinct consecutive support feet `(x, y, is_left)` in log order.
pub fn footprints(rows: &[CsvRow]) -> Vec<(f64, f64, bool)> {
    let mut feet: Vec<(f64, f64, bool)> = Vec::new();
    for r in rows {
        let f = (r.foot_x, r.foot_y, r.side == slipwalk::Side::Left);
        if feet.last() != Some(&f) {
            feet.push(f);
        }
    }
    feet
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_steps_are_round() {
        assert_eq!(nice_step(12.0), 2.0);
        assert_eq!(nice_step(0.9), 0.2);
        assert_eq!(nice_step(0.06), 0.01);
        assert_eq!(label(-0.0000001, 0.1), "0.0");
        assert_eq!(label(0.2, 0.1), "0.2");
    }

    #[test]
    fn empty_logs_are_refused() {
        let err = render(PlotKind::Rcof, &[], &PlotContext::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
