//! Minimal self-contained SVG charts.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub enum Mark {
    Lines,
    Dots,
    Bars,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'a>(points: impl Iterator<Item = &'a (f64, f64)>, zero_y: bool) -> Self {
        let (mut x, mut y) = ((f64::INFINITY, f64::NEG_INFINITY), (f64::INFINITY, f64::NEG_INFINITY));
        for &(px, py) in points {
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py), y.1.max(py));
        }
        if zero_y {
            y.0 = y.0.min(0.0);
        }
        let pad = |r: (f64, f64)| {
            if !r.0.is_finite() {
                (0.0, 1.0)
            } else if r.1 - r.0 < 1e-12 {
                (r.0 - 0.5, r.1 + 0.5)
            } else {
                r
            }
        };
        Frame { x: pad(x), y: pad(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `series` on shared axes.
pub fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series], mark: Mark) -> String {
    let frame = Frame::fit(series.iter().flat_map(|s| s.points.iter()), matches!(mark, Mark::Bars));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r#"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" stroke="black" fill="none"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = frame.x.0 + f * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + f * (frame.y.1 - frame.y.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{:.3}</text>"#, frame.px(xv), y1 + 18.0, xv);
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{:.3}</text>"#, x0 - 6.0, frame.py(yv) + 4.0, yv);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    let groups = series.len().max(1) as f64;
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        match mark {
            Mark::Lines => {
                let path: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", frame.px(x), frame.py(y))).collect();
                let _ = writeln!(out, r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, path.join(" "));
            }
            Mark::Dots => {
                for &(x, y) in &s.points {
                    let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}" fill-opacity="0.7"/>"#, frame.px(x), frame.py(y));
                }
            }
            Mark::Bars => {
                let step = (frame.px(frame.x.0 + 1.0) - frame.px(frame.x.0)).abs().min(40.0);
                let width = 0.8 * step / groups;
                for &(x, y) in &s.points {
                    let left = frame.px(x) - 0.4 * step + k as f64 * width;
                    let top = frame.py(y.max(0.0));
                    let _ = writeln!(
                        out,
                        r#"<rect x="{left:.1}" y="{top:.1}" width="{width:.1}" height="{:.1}" fill="{color}"/>"#,
                        frame.py(0.0) - top
                    );
                }
            }
        }
        let ly = TOP + 14.0 * k as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/>"#, x1 - 140.0, ly);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x1 - 125.0, ly + 9.0, escape(&s.name));
    }
    out.push_str("</svg>\n");
    out
}
