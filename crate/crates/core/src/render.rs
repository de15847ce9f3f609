//! Deterministic SVG figures of curves and momenta.
//!
//! Coordinates are normalized curve coordinates; axes are labelled in the
//! original units (clock time, counts/min) through [`ScaleParams`]. All
//! numbers are written with fixed precision so identical inputs give
//! byte-identical files.

use std::fmt::Write as _;

use crate::geometry::{Curve, Vec2};
use crate::ingest::ScaleParams;
use crate::shooting::MomentaField;

#[derive(Clone, Debug)]
pub struct RenderOptions {
    pub width: f64,
    pub height: f64,
    pub scale: ScaleParams,
    /// Minutes between consecutive control points.
    pub control_spacing_min: f64,
    /// Minutes between drawn arrows.
    pub arrow_stride_min: f64,
    /// Length of the longest arrow in normalized units; arrows keep their
    /// relative lengths.
    pub max_arrow_len: f64,
    pub title: String,
}

impl RenderOptions {
    pub fn new(scale: ScaleParams, control_spacing_min: f64) -> Self {
        Self {
            width: 900.0,
            height: 480.0,
            scale,
            control_spacing_min,
            arrow_stride_min: 10.0,
            max_arrow_len: 0.12,
            title: String::new(),
        }
    }

    /// Every how many control points an arrow is drawn.
    pub fn arrow_every(&self) -> usize {
        (self.arrow_stride_min / self.control_spacing_min).round().max(1.0) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineStyle {
    Solid,
    Dashed,
}

#[derive(Clone, Debug)]
struct Series {
    points: Vec<Vec2<f64>>,
    color: &'static str,
    style: LineStyle,
    label: String,
}

#[derive(Clone, Debug)]
struct Arrow {
    from: Vec2<f64>,
    to: Vec2<f64>,
}

/// Accumulates curves and arrows, then writes one SVG document.
#[derive(Clone, Debug)]
pub struct Figure {
    opts: RenderOptions,
    series: Vec<Series>,
    arrows: Vec<Arrow>,
}

pub const BASELINE_COLOR: &str = "#1f2a6b";
pub const ARROW_COLOR: &str = "#7fb8e6";
pub const TARGET_COLOR: &str = "#222222";
pub const PLUS_COLOR: &str = "#d62728";
pub const MINUS_COLOR: &str = "#2ca02c";

const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 70.0;

impl Figure {
    pub fn new(opts: RenderOptions) -> Self {
        Self {
            opts,
            series: Vec::new(),
            arrows: Vec::new(),
        }
    }

    pub fn curve(&mut self, curve: &Curve<f64>, color: &'static str, style: LineStyle, label: &str) -> &mut Self {
        self.series.push(Series {
            points: curve.points().to_vec(),
            color,
            style,
            label: label.to_string(),
        });
        self
    }

    /// Arrows along `momenta` at every `arrow_every`-th control point;
    /// zero momenta are skipped.
    pub fn momenta(&mut self, momenta: &MomentaField<f64>) -> &mut Self {
        let every = self.opts.arrow_every();
        let longest = momenta
            .p0
            .iter()
            .map(|p| p.norm_sq().sqrt())
            .fold(0.0f64, f64::max);
        if longest == 0.0 {
            return self;
        }
        let s = self.opts.max_arrow_len / longest;
        for (j, (q, p)) in momenta.q0.as_slice().iter().zip(&momenta.p0).enumerate() {
            if j % every != 0 || (p.x == 0.0 && p.y == 0.0) {
                continue;
            }
            self.arrows.push(Arrow { from: *q, to: *q + *p * s });
        }
        self
    }

    pub fn n_arrows(&self) -> usize {
        self.arrows.len()
    }

    pub fn to_svg(&self) -> String {
        let o = &self.opts;
        let sc = &o.scale;
        let (w, h) = (o.width, o.height);
        let pw = w - MARGIN_L - MARGIN_R;
        let ph = h - MARGIN_T - MARGIN_B;

        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in self
            .series
            .iter()
            .flat_map(|s| s.points.iter())
            .chain(self.arrows.iter().flat_map(|a| [&a.from, &a.to]))
        {
            let m = sc.from_y(p.y);
            lo = lo.min(m);
            hi = hi.max(m);
        }
        if !lo.is_finite() {
            lo = 0.0;
            hi = sc.m_max;
        }
        let (ticks_y, lo, hi) = nice_ticks(lo.min(0.0), hi, 6);
        let px = |x: f64| MARGIN_L + (x + 1.0) * 0.5 * pw;
        let py = |y: f64| {
            let m = sc.from_y(y);
            MARGIN_T + (hi - m) / (hi - lo) * ph
        };

        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
        );
        let _ = writeln!(s, r##"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="#ffffff"/>"##);
        if !o.title.is_empty() {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
                MARGIN_L + pw / 2.0,
                escape(&o.title)
            );
        }
        // axes
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN_L:.2}" y="{MARGIN_T:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="#888888" stroke-width="1"/>"##
        );
        for t in &ticks_y {
            let y = MARGIN_T + (hi - t) / (hi - lo) * ph;
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_L:.2}" y2="{y:.2}" stroke="#888888" stroke-width="1"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"##,
                MARGIN_L - 5.0,
                MARGIN_L - 8.0,
                y + 4.0,
                fmt_tick(*t)
            );
        }
        for t in time_ticks(sc.t_min, sc.t_max) {
            let x = px(sc.to_x(t));
            let yb = MARGIN_T + ph;
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{yb:.2}" x2="{x:.2}" y2="{:.2}" stroke="#888888" stroke-width="1"/><text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"##,
                yb + 5.0,
                yb + 18.0,
                clock(t)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">time of day</text>"#,
            MARGIN_L + pw / 2.0,
            h - 30.0
        );
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">activity (counts/min)</text>"#,
            MARGIN_T + ph / 2.0,
            MARGIN_T + ph / 2.0
        );

        for a in &self.arrows {
            let (x1, y1, x2, y2) = (px(a.from.x), py(a.from.y), px(a.to.x), py(a.to.y));
            let _ = writeln!(
                s,
                r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{ARROW_COLOR}" stroke-width="1.2"/>"#
            );
            let _ = writeln!(s, "{}", arrow_head(x1, y1, x2, y2));
        }
        for ser in &self.series {
            let mut d = String::new();
            for (i, p) in ser.points.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, px(p.x), py(p.y));
            }
            let dash = match ser.style {
                LineStyle::Solid => "",
                LineStyle::Dashed => r#" stroke-dasharray="6,4""#,
            };
            let _ = writeln!(
                s,
                r#"<path d="{d}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
                ser.color
            );
        }
        // legend
        for (i, ser) in self.series.iter().filter(|s| !s.label.is_empty()).enumerate() {
            let y = MARGIN_T + 14.0 + 16.0 * i as f64;
            let x = MARGIN_L + pw - 190.0;
            let dash = if ser.style == LineStyle::Dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"{dash}/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
                x + 24.0,
                ser.color,
                x + 30.0,
                y + 4.0,
                escape(&ser.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn arrow_head(x1: f64, y1: f64, x2: f64, y2: f64) -> String {
    let (dx, dy) = (x2 - x1, y2 - y1);
    let len = (dx * dx + dy * dy).sqrt();
    if len < 1e-9 {
        return String::new();
    }
    let (ux, uy) = (dx / len, dy / len);
    let size = 5.0f64.min(0.6 * len);
    let (bx, by) = (x2 - ux * size, y2 - uy * size);
    let (nx, ny) = (-uy * size * 0.5, ux * size * 0.5);
    format!(
        r#"<polygon points="{x2:.2},{y2:.2} {:.2},{:.2} {:.2},{:.2}" fill="{ARROW_COLOR}"/>"#,
        bx + nx,
        by + ny,
        bx - nx,
        by - ny
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn clock(minute: f64) -> String {
    let m = minute.round() as i64;
    format!("{:02}:{:02}", m.div_euclid(60) % 24, m.rem_euclid(60))
}

/// Full hours in `[t_min, t_max]`, every two hours when the span is long.
fn time_ticks(t_min: f64, t_max: f64) -> Vec<f64> {
    let span_h = (t_max - t_min) / 60.0;
    let step = if span_h > 8.0 { 120.0 } else { 60.0 };
    let first = (t_min / step).ceil() * step;
    let mut out = Vec::new();
    let mut t = first;
    while t <= t_max + 1e-9 {
        out.push(t);
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.1}")
    }
}

/// Round tick values covering `[lo, hi]` and the padded range they span.
fn nice_ticks(lo: f64, hi: f64, target: usize) -> (Vec<f64>, f64, f64) {
    let span = (hi - lo).max(1e-9);
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|f| f * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    ((0..=n).map(|i| start + i as f64 * step).collect(), start, end)
}
