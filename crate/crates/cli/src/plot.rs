//! Deterministic SVG rendering of pool curves (dashed, one per depth) and
//! protocol estimates (markers with 1.96·SE bars), with the deepest pool
//! curve drawn solid as the long-time reference.

use crate::table::{CurveRow, EstimateRow};
use std::collections::BTreeSet;
use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const GRID_TOL: f64 = 1e-9;

/// Data-to-pixel mapping of the plot area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Frame {
    pub fn x_px(&self, x: f64) -> f64 {
        LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - LEFT - RIGHT)
    }

    pub fn y_px(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - TOP - BOTTOM)
    }

    /// Pixels per unit of `Z`.
    pub fn y_scale(&self) -> f64 {
        (HEIGHT - TOP - BOTTOM) / (self.y_max - self.y_min)
    }
}

/// Depths drawn as dashed curves: those of the estimates, or depths 1 to 4
/// of the curves when there are no estimates.
fn series_depths(curves: &[CurveRow], estimates: &[EstimateRow]) -> Vec<u32> {
    if estimates.is_empty() {
        curves.iter().map(|c| c.t).filter(|&t| t <= 4).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        estimates.iter().map(|e| e.t).collect::<BTreeSet<_>>().into_iter().collect()
    }
}

pub fn frame(curves: &[CurveRow], estimates: &[EstimateRow]) -> Frame {
    let xs = curves.iter().map(|c| c.theta).chain(estimates.iter().map(|e| e.theta));
    let (mut x_min, mut x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !x_min.is_finite() {
        (x_min, x_max) = (std::f64::consts::FRAC_PI_2, std::f64::consts::PI);
    }
    if x_max - x_min < 1e-6 {
        (x_min, x_max) = (x_min - 0.1, x_max + 0.1);
    }
    let lo = estimates.iter().map(|e| e.z_hat - 1.96 * e.se).fold(0.0, f64::min);
    let hi = estimates.iter().map(|e| e.z_hat + 1.96 * e.se).chain(curves.iter().map(|c| c.z_mean)).fold(0.5, f64::max);
    Frame { x_min, x_max, y_min: (lo * 10.0).floor() / 10.0, y_max: (hi * 10.0).ceil() / 10.0 }
}

/// Estimate angles that do not appear in the curve grid.
fn grid_mismatch(curves: &[CurveRow], estimates: &[EstimateRow]) -> Vec<f64> {
    let mut bad: Vec<f64> = estimates
        .iter()
        .map(|e| e.theta)
        .filter(|&th| !curves.iter().any(|c| (c.theta - th).abs() <= GRID_TOL))
        .collect();
    bad.sort_by(f64::total_cmp);
    bad.dedup();
    bad
}

pub fn render(curves: &[CurveRow], estimates: &[EstimateRow], title: &str) -> Result<String, String> {
    if !curves.is_empty() {
        let bad = grid_mismatch(curves, estimates);
        if !bad.is_empty() {
            let list: Vec<String> = bad.iter().map(|x| x.to_string()).collect();
            return Err(format!("estimate theta values not on the curve grid: {}", list.join(", ")));
        }
    }
    let f = frame(curves, estimates);
    let depths = series_depths(curves, estimates);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="18" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    axes(&mut s, &f);
    let t_max = curves.iter().map(|c| c.t).max();
    if let Some(tm) = t_max.filter(|tm| depths.last().is_none_or(|d| tm > d)) {
        polyline(&mut s, &f, curves, tm, "#7f7f7f", None);
    }
    for (i, &t) in depths.iter().enumerate() {
        polyline(&mut s, &f, curves, t, COLORS[i % COLORS.len()], Some("6,4"));
    }
    for e in estimates {
        let i = depths.iter().position(|&d| d == e.t).unwrap_or(0);
        let color = COLORS[i % COLORS.len()];
        let (x, y) = (f.x_px(e.theta), f.y_px(e.z_hat));
        let half = 1.96 * e.se;
        let (y_lo, y_hi) = (f.y_px(e.z_hat - half), f.y_px(e.z_hat + half));
        let _ = writeln!(
            s,
            r#"<line class="errbar" data-halfwidth="{half}" x1="{x:.2}" y1="{y_lo:.2}" x2="{x:.2}" y2="{y_hi:.2}" stroke="{color}"/>"#
        );
        for yc in [y_lo, y_hi] {
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{yc:.2}" x2="{:.2}" y2="{yc:.2}" stroke="{color}"/>"#, x - 4.0, x + 4.0);
        }
        let _ = writeln!(s, r#"<circle class="marker" cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#);
    }
    legend(&mut s, &depths, t_max);
    s.push_str("</svg>\n");
    Ok(s)
}

fn polyline(s: &mut String, f: &Frame, curves: &[CurveRow], t: u32, color: &str, dash: Option<&str>) {
    let mut pts: Vec<(f64, f64)> = curves.iter().filter(|c| c.t == t).map(|c| (c.theta, c.z_mean)).collect();
    if pts.is_empty() {
        return;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.x_px(x), f.y_px(y))).collect();
    let dash = dash.map(|d| format!(r#" stroke-dasharray="{d}""#)).unwrap_or_default();
    let _ = writeln!(
        s,
        r#"<polyline class="curve" data-t="{t}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
        coords.join(" ")
    );
}

fn axes(s: &mut String, f: &Frame) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y1}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    let n_y = ((f.y_max - f.y_min) * 10.0).round() as i64;
    for k in 0..=n_y {
        let v = f.y_min + k as f64 / 10.0;
        let y = f.y_px(v);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, x0 - 8.0, y + 4.0);
    }
    let step = 0.25;
    let mut v = (f.x_min / step).ceil() * step;
    while v <= f.x_max + 1e-12 {
        let x = f.x_px(v);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v:.2}</text>"#, y0 + 20.0);
        v += step;
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">θ</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0);
    let _ = writeln!(s, r#"<text x="20" y="{:.2}" text-anchor="middle">Z</text>"#, (y0 + y1) / 2.0);
}

fn legend(s: &mut String, depths: &[u32], t_max: Option<u32>) {
    let x = WIDTH - RIGHT + 15.0;
    let mut y = TOP + 15.0;
    for (i, t) in depths.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{c}" stroke-dasharray="6,4"/>"#, x + 25.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">t = {t}</text>"#, x + 32.0, y + 4.0);
        y += 20.0;
    }
    if let Some(tm) = t_max.filter(|tm| depths.last().is_none_or(|d| tm > d)) {
        let _ = writeln!(s, r##"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="#7f7f7f"/>"##, x + 25.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">t = {tm}</text>"#, x + 32.0, y + 4.0);
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
