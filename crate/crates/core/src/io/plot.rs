use std::fmt::Write as _;
use std::path::Path;

use super::TraceRow;
use crate::error::{Error, Result};

/// Gaps at or below zero are drawn at this value on the log axis.
pub const GAP_FLOOR: f64 = 1e-16;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// A named `(t, f_gap)` curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    pub fn from_rows(name: &str, rows: &[TraceRow]) -> Self {
        PlotSeries {
            name: name.to_string(),
            points: rows.iter().map(|r| (r.t, r.f_gap)).collect(),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Standalone SVG of `log10 f_gap` against `t`, one polyline per series.
pub fn emit_plot(series: &[PlotSeries], path: &Path) -> Result<()> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("plot needs at least one series".into()));
    }
    std::fs::write(path, render(series)).map_err(|e| Error::io(path, e))
}

pub(crate) fn render(series: &[PlotSeries]) -> String {
    let log_gap = |g: f64| g.max(GAP_FLOOR).log10();
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut t_max, mut y_min, mut y_max) = (0.0_f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(t, g) in all {
        t_max = t_max.max(t);
        y_min = y_min.min(log_gap(g));
        y_max = y_max.max(log_gap(g));
    }
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    let (y_lo, mut y_hi) = (y_min.floor(), y_max.ceil());
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    if t_max <= 0.0 {
        t_max = 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |t: f64| LEFT + t / t_max * plot_w;
    let py = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let decade_step = ((y_hi - y_lo) / 10.0).ceil().max(1.0);
    let mut y = y_lo;
    while y <= y_hi {
        let yy = py(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            yy + 4.0,
            y as i64
        );
        y += decade_step;
    }
    for k in 0..=5 {
        let t = t_max * k as f64 / 5.0;
        let xx = px(t);
        let _ = writeln!(
            svg,
            r#"<text x="{xx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            format_tick(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">f - f* (log scale)</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let stride = s.points.len().div_ceil(MAX_POINTS).max(1);
        let mut pts: Vec<(f64, f64)> = s.points.iter().step_by(stride).copied().collect();
        if let Some(&last) = s.points.last() {
            if pts.last() != Some(&last) {
                pts.push(last);
            }
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&(t, g)| format!("{:.2},{:.2}", px(t), py(log_gap(g))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 16.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(t: f64) -> String {
    if t == t.round() {
        format!("{}", t as i64)
    } else {
        format!("{t:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polylines(svg: &str) -> Vec<&str> {
        svg.lines().filter(|l| l.starts_with("<polyline")).collect()
    }

    #[test]
    fn constant_trace_is_horizontal() {
        let s = PlotSeries {
            name: "flat".into(),
            points: (0..10).map(|k| (k as f64, 1e-3)).collect(),
        };
        let svg = render(&[s]);
        let lines = polylines(&svg);
        assert_eq!(lines.len(), 1);
        let pts = lines[0].split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
        let ys: Vec<&str> = pts.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.iter().all(|y| *y == ys[0]));
    }

    #[test]
    fn one_labeled_curve_per_series() {
        let mk = |n: &str| PlotSeries {
            name: n.into(),
            points: vec![(0.0, 1.0), (1.0, 1e-4)],
        };
        let svg = render(&[mk("GD"), mk("NR"), mk("HISO")]);
        assert_eq!(polylines(&svg).len(), 3);
        for n in ["GD", "NR", "HISO"] {
            assert!(svg.contains(&format!(">{n}</text>")));
        }
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    }

    #[test]
    fn nonpositive_gaps_clamp_to_floor() {
        let s = PlotSeries {
            name: "z".into(),
            points: vec![(0.0, 1.0), (1.0, 0.0), (2.0, -1.0)],
        };
        let svg = render(&[s]);
        assert!(svg.contains(">1e-16</text>"));
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn empty_set_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plot(&[], &dir.path().join("x.svg")).is_err());
    }
}
