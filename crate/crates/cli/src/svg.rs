//! Self-contained SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: [f64; 4] = [60.0, 20.0, 30.0, 50.0]; // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64> + Clone, log: bool) -> Self {
        let map = |v: f64| if log { v.log10() } else { v };
        let lo = values.clone().map(map).fold(f64::INFINITY, f64::min);
        let hi = values.map(map).fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        Axis { log, lo, hi }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            let ticks: Vec<f64> = (a..=b)
                .map(|k| 10f64.powi(k))
                .filter(|&t| (self.lo..=self.hi).contains(&t.log10()))
                .collect();
            if ticks.len() >= 2 {
                return ticks;
            }
            return vec![10f64.powf(self.lo), 10f64.powf(self.hi)];
        }
        (0..=4).map(|k| self.lo + (self.hi - self.lo) * k as f64 / 4.0).collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the series as a log-log chart. Any non-positive coordinate switches
/// that axis to linear scale and adds a warning line to the chart.
pub fn render_svg(series: &[Series], x_label: &str, y_label: &str) -> Result<String, CliError> {
    if series.is_empty() {
        return Err(CliError::Config("svg: empty series list".into()));
    }
    for s in series {
        if s.points.len() < 2 {
            return Err(CliError::Config(format!("svg: series '{}' needs at least 2 points", s.name)));
        }
        if s.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(CliError::Numerical(format!("svg: series '{}' has non-finite values", s.name)));
        }
    }
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let x_log = xs.clone().all(|v| v > 0.0);
    let y_log = ys.clone().all(|v| v > 0.0);
    let (xa, ya) = (Axis::new(xs, x_log), Axis::new(ys, y_log));

    let [ml, mr, mt, mb] = MARGIN;
    let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
    let px = |x: f64| ml + xa.frac(x) * pw;
    let py = |y: f64| mt + (1.0 - ya.frac(y)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in xa.ticks() {
        let x = px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.3e}</text>"#,
            mt + ph,
            mt + ph + 5.0,
            mt + ph + 18.0
        );
    }
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{ml}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2e}</text>"#,
            ml - 5.0,
            ml - 7.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        HEIGHT - 8.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            ml + 10.0,
            mt + 16.0 * (k + 1) as f64,
            escape(&s.name)
        );
    }
    if !x_log || !y_log {
        let _ = writeln!(
            out,
            r##"<text class="warning" x="{:.2}" y="{:.2}" text-anchor="end" fill="#b00">warning: non-positive values, linear axis used</text>"##,
            WIDTH - mr - 4.0,
            mt + 16.0
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_svg(series: &[Series], path: &Path) -> Result<(), CliError> {
    let svg = render_svg(series, "ε", "relative error")?;
    phasemem::grid::write_atomic(path, svg.as_bytes())?;
    Ok(())
}
