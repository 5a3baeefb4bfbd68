//! Dependency-free log-log SVG plots.

use std::fmt::Write;

/// A named curve of `(T, value)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

pub const WIDTH: f64 = 720.0;
pub const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, t: f64) -> f64 {
        let (lo, hi) = self.x;
        LEFT + (t.log10() - lo) / (hi - lo) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        let (lo, hi) = self.y;
        TOP + (hi - v.log10()) / (hi - lo) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Decade-aligned range covering `values` (log10 space).
fn decade_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v.log10());
        hi = hi.max(v.log10());
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let (lo, hi) = (lo.floor(), hi.ceil());
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Renders `series` as solid polylines and `envelopes` as dashed ones on
/// shared log-log axes. Points with a nonpositive or non-finite coordinate
/// cannot be placed: their values are clipped to the bottom of the axis and
/// a warning is drawn on the plot.
pub fn emit_svg_loglog(series: &[Series], envelopes: &[Series]) -> String {
    let all = || series.iter().chain(envelopes).flat_map(|s| s.points.iter());
    let placeable = |&(t, v): &(f64, f64)| t > 0.0 && t.is_finite() && v > 0.0 && v.is_finite();
    let clipped = all().filter(|p| !placeable(p)).count();
    let axes = Axes {
        x: decade_range(all().filter(|p| placeable(p)).map(|p| p.0)),
        y: decade_range(all().filter(|p| placeable(p)).map(|p| p.1)),
    };
    let floor = 10f64.powf(axes.y.0);
    let x_floor = 10f64.powf(axes.x.0);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect class="frame" x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    for e in (axes.x.0 as i64)..=(axes.x.1 as i64) {
        let x = axes.px(10f64.powi(e as i32));
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" font-size="12" text-anchor="middle">1e{e}</text>"#,
            y1 + 5.0,
            y1 + 20.0
        );
    }
    for e in (axes.y.0 as i64)..=(axes.y.1 as i64) {
        let y = axes.py(10f64.powi(e as i32));
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" font-size="12" text-anchor="end">1e{e}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text class="xlabel" x="{:.2}" y="{}" font-size="14" text-anchor="middle">T</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text class="ylabel" x="20" y="{:.2}" font-size="14" text-anchor="middle" transform="rotate(-90 20 {:.2})">value</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1)
    );

    let curves = series
        .iter()
        .map(|s| (s, false))
        .chain(envelopes.iter().map(|s| (s, true)));
    for (k, (s, dashed)) in curves.enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|&(t, v)| {
                let t = if t > 0.0 && t.is_finite() { t } else { x_floor };
                let v = if v > 0.0 && v.is_finite() { v } else { floor };
                format!("{:.2},{:.2}", axes.px(t), axes.py(v))
            })
            .collect();
        let (class, dash) = if dashed {
            ("envelope", r#" stroke-dasharray="6 4""#)
        } else {
            ("series", "")
        };
        let _ = writeln!(
            out,
            r#"<polyline class="{class}" data-name="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            escape(&s.name),
            pts.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = x1 + 15.0;
        let _ = writeln!(
            out,
            r#"<line class="legend" x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 25.0,
            lx + 30.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    if clipped > 0 {
        let _ = writeln!(
            out,
            r##"<text class="warning" x="{}" y="{}" font-size="12" fill="#b00">warning: {clipped} nonpositive or non-finite value(s) clipped to the axis</text>"##,
            x0 + 5.0,
            y0 + 15.0
        );
    }
    out.push_str("</svg>\n");
    out
}
