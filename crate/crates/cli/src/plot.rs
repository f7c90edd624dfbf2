//! Minimal deterministic SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64, include_zero: bool) -> Self {
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if include_zero {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        if hi - lo < 1e-12 {
            lo -= 1.0;
            hi += 1.0;
        } else if !include_zero {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, px_lo, px_hi }
    }

    fn px(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4).map(|i| self.lo + (self.hi - self.lo) * i as f64 / 4.0).collect()
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn y_axis(out: &mut String, y: &Axis, label: &str) {
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{:.2}" stroke="black"/>"#,
        HEIGHT - BOTTOM
    );
    for t in y.ticks() {
        let py = y.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2}</text>"#,
            LEFT - 4.0,
            LEFT - 7.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(label)
    );
}

/// Grouped bars: one group per category, one bar per series.
pub fn bar_chart(title: &str, y_label: &str, groups: &[String], series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let y = Axis::new(series.iter().flat_map(|(_, v)| v.iter().copied()), HEIGHT - BOTTOM, TOP, true);
    y_axis(&mut out, &y, y_label);
    let base = y.px(0.0);
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#,
        WIDTH - RIGHT
    );
    let slot = (WIDTH - LEFT - RIGHT) / groups.len().max(1) as f64;
    let bar = 0.8 * slot / series.len().max(1) as f64;
    for (g, name) in groups.iter().enumerate() {
        let x0 = LEFT + g as f64 * slot + 0.1 * slot;
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values[g];
            let (top, bottom) = (y.px(v.max(0.0)), y.px(v.min(0.0)));
            let _ = writeln!(
                out,
                r#"<rect class="bar" x="{:.2}" y="{top:.2}" width="{bar:.2}" height="{:.2}" fill="{}"><title>{} {}: {v:.4}</title></rect>"#,
                x0 + s as f64 * bar,
                bottom - top,
                PALETTE[s % PALETTE.len()],
                escape(name),
                escape(&series[s].0)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + (g as f64 + 0.5) * slot,
            HEIGHT - BOTTOM + 18.0,
            escape(name)
        );
    }
    for (s, (name, _)) in series.iter().enumerate() {
        let lx = LEFT + 10.0 + s as f64 * 100.0;
        let ly = HEIGHT - 16.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{ly:.2}">{}</text>"#,
            ly - 9.0,
            PALETTE[s % PALETTE.len()],
            lx + 14.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Least-squares line `(intercept, slope)`; `None` when x is constant.
pub fn trend_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if n < 2.0 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-300 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// One point per labelled `(x, y)`, with an optional least-squares trend line.
pub fn scatter(title: &str, x_label: &str, y_label: &str, points: &[(String, f64, f64)], trend: bool) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let x = Axis::new(points.iter().map(|p| p.1), LEFT, WIDTH - RIGHT, false);
    let y = Axis::new(points.iter().map(|p| p.2), HEIGHT - BOTTOM, TOP, false);
    y_axis(&mut out, &y, y_label);
    let base = HEIGHT - BOTTOM;
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="black"/>"#,
        WIDTH - RIGHT
    );
    for t in x.ticks() {
        let px = x.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{base:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{t:.2}</text>"#,
            base + 4.0,
            base + 18.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );
    if trend {
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.1, p.2)).collect();
        if let Some((a, b)) = trend_line(&xy) {
            let (x0, x1) = (x.lo, x.hi);
            let _ = writeln!(
                out,
                r#"<line class="trend" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="6 4"/>"#,
                x.px(x0),
                y.px(a + b * x0),
                x.px(x1),
                y.px(a + b * x1),
                PALETTE[2]
            );
        }
    }
    for (label, vx, vy) in points {
        let _ = writeln!(
            out,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4" fill="{}"><title>{}: {vx:.4}, {vy:.4}</title></circle>"#,
            x.px(*vx),
            y.px(*vy),
            PALETTE[0],
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}
