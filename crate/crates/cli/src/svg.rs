//! Minimal SVG plots: points, an optional reference line, axes with end labels.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 360.0;
const M: f64 = 48.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: &[f64], ys: &[f64]) -> Frame {
        let (x0, x1) = range(xs);
        let (y0, y1) = range(ys);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        M + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * M)
    }

    fn py(&self, y: f64) -> f64 {
        H - M - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * M)
    }
}

fn range(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str, f: &Frame) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(
        out,
        r#"<path d="M{M} {} L{} {} M{M} {M} L{M} {}" stroke="black" fill="none"/>"#,
        H - M,
        W - M,
        H - M,
        H - M
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 10.0, esc(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(ylabel)
    );
    let _ = writeln!(out, r#"<text x="{M}" y="{}" text-anchor="middle">{:.3}</text>"#, H - M + 14.0, f.x0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{:.3}</text>"#, W - M, H - M + 14.0, f.x1);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, M - 4.0, H - M, f.y0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, M - 4.0, M + 4.0, f.y1);
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Scatter plot; `line` draws y = a + b x across the frame.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, xs: &[f64], ys: &[f64], line: Option<(f64, f64)>) -> String {
    let f = Frame::fit(xs, ys);
    let mut out = String::new();
    header(&mut out, title, xlabel, ylabel, &f);
    if let Some((a, b)) = line {
        let (ya, yb) = (a + b * f.x0, a + b * f.x1);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
            f.px(f.x0),
            f.py(ya),
            f.px(f.x1),
            f.py(yb)
        );
    }
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue"/>"#, f.px(*x), f.py(*y));
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram with `bins` equal-width bins.
pub fn histogram(title: &str, xlabel: &str, values: &[f64], bins: usize) -> String {
    let (lo, hi) = range(values);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(1) as f64;
    let f = Frame { x0: lo, x1: hi, y0: 0.0, y1: top * 1.05 };
    let mut out = String::new();
    header(&mut out, title, xlabel, "count", &f);
    for (k, c) in counts.iter().enumerate() {
        let a = lo + k as f64 * width;
        let x = f.px(a);
        let w = f.px(a + width) - x;
        let y = f.py(*c as f64);
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="steelblue" stroke="white"/>"#,
            w,
            f.py(0.0) - y
        );
    }
    out.push_str("</svg>\n");
    out
}
