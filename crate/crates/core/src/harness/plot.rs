use std::fmt::Write as _;

use super::csvlog::{aggregate, AggregatePoint, Axis, RunLog};
use crate::error::{invalid, Result};
use crate::workers::RunMode;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStyle {
    Solid,
    Dashed,
    Dotted,
}

impl LineStyle {
    /// Asynchronous modes are solid, their synchronous and partial baselines
    /// dashed, model-free dotted.
    pub fn for_mode(mode: RunMode) -> Self {
        match mode {
            RunMode::AsyncRealtime | RunMode::AsyncVirtual => LineStyle::Solid,
            RunMode::Sync | RunMode::PartialModelPolicy | RunMode::PartialPolicyData => LineStyle::Dashed,
            RunMode::ModelFree => LineStyle::Dotted,
        }
    }

    fn dasharray(self) -> Option<&'static str> {
        match self {
            LineStyle::Solid => None,
            LineStyle::Dashed => Some("8,5"),
            LineStyle::Dotted => Some("2,4"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub style: LineStyle,
    pub points: Vec<AggregatePoint>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// One learning curve per series with a shaded ± std band. The x axis spans
/// `[min(0, smallest x), largest x]`.
pub fn render_svg(series: &[PlotSeries], axis: Axis) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(invalid("a plot needs at least one nonempty series"));
    }
    let all = || series.iter().flat_map(|s| s.points.iter());
    if all().any(|p| !p.x.is_finite()) {
        return Err(invalid("plot abscissae must be finite"));
    }
    let x_max = all().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let x_min = all().map(|p| p.x).fold(0.0, f64::min);
    let finite = |v: f64| v.is_finite().then_some(v);
    let y_lo = all().filter_map(|p| finite(p.mean - p.std)).fold(f64::INFINITY, f64::min);
    let y_hi = all().filter_map(|p| finite(p.mean + p.std)).fold(f64::NEG_INFINITY, f64::max);
    let (y_lo, y_hi) = if y_lo.is_finite() { (y_lo, y_hi) } else { (0.0, 1.0) };
    let y_pad = ((y_hi - y_lo) * 0.05).max(1e-9);
    let (y_lo, y_hi) = (y_lo - y_pad, y_hi + y_pad);
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / x_span * plot_w;
    let sy = |y: f64| TOP + (y_hi - y.clamp(y_lo, y_hi)) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<g id="plot-area" data-x-min="{x_min}" data-x-max="{x_max}">"#);
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP, TOP + plot_h);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x_min + f * (x_max - x_min);
        let px = sx(xv);
        let _ = writeln!(svg, r#"<line x1="{px:.2}" y1="{y1}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(
            svg,
            r#"<text class="x-tick" x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y1 + 18.0,
            tick_label(xv)
        );
        let yv = y_lo + f * (y_hi - y_lo);
        let py = sy(yv);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(
            svg,
            r#"<text class="y-tick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="x-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0,
        escape(axis.label())
    );
    let _ = writeln!(
        svg,
        r#"<text class="y-label" transform="translate(20 {:.2}) rotate(-90)" text-anchor="middle">average return</text>"#,
        TOP + plot_h / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let band: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean + p.std)))
            .chain(s.points.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean - p.std))))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.join(" ")
        );
        let line: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean))).collect();
        let dash = s.style.dasharray().map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
        let _ = writeln!(
            svg,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}><title>{}</title></polyline>"#,
            line.join(" "),
            escape(&s.label)
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 30.0
        );
        let _ = writeln!(svg, r#"<text class="legend" x="{}" y="{}">{}</text>"#, lx + 36.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

/// Groups logs by `(env, mode)` metadata, aggregates each group across seeds
/// and renders them together.
pub fn emit_plot(logs: &[RunLog], axis: Axis) -> Result<String> {
    if logs.is_empty() {
        return Err(invalid("no CSV logs to plot"));
    }
    let mut groups: Vec<((String, String), Vec<RunLog>)> = Vec::new();
    for log in logs {
        if log.rows.is_empty() {
            return Err(invalid("cannot plot an empty CSV log"));
        }
        let key = (
            log.meta_value("env").unwrap_or("").to_string(),
            log.meta_value("mode").unwrap_or("").to_string(),
        );
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(log.clone()),
            None => groups.push((key, vec![log.clone()])),
        }
    }
    let mut series = Vec::with_capacity(groups.len());
    for ((env, mode), g) in groups {
        let style = mode.parse::<RunMode>().map(LineStyle::for_mode).unwrap_or(LineStyle::Solid);
        let label = match (env.is_empty(), mode.is_empty()) {
            (true, true) => "run".to_string(),
            (true, false) => mode.clone(),
            (false, true) => env.clone(),
            (false, false) => format!("{env} {mode}"),
        };
        series.push(PlotSeries {
            label: format!("{label} (n={})", g.len()),
            style,
            points: aggregate(&g, axis)?,
        });
    }
    render_svg(&series, axis)
}
