//! Static SVG charts for the `--plots` switch.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(points: &[(f64, f64)]) -> Frame {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for &(a, b) in points {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
        let widen = |r: (f64, f64)| if r.1 > r.0 { r } else { (r.0 - 0.5, r.0 + 0.5) };
        Frame { x: widen(x), y: widen(y) }
    }

    fn px(&self, a: f64) -> f64 {
        PAD + (a - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * PAD)
    }

    fn py(&self, b: f64) -> f64 {
        H - PAD - (b - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * PAD)
    }
}

fn open(title: &str, xlabel: &str, ylabel: &str, f: &Frame) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let (x0, x1, y0, y1) = (PAD, W - PAD, H - PAD, PAD);
    let _ = writeln!(s, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#, W / 2.0, H - 16.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, anchor, x, y) in [
        (f.x.0, "start", x0, y0 + 16.0),
        (f.x.1, "end", x1, y0 + 16.0),
        (f.y.0, "end", x0 - 4.0, y0),
        (f.y.1, "end", x0 - 4.0, y1 + 4.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{v:.3}</text>"#);
    }
    s
}

/// Scatter of `points` with an optional reference line `y = slope·x + intercept`.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], line: Option<(f64, f64)>) -> String {
    let finite: Vec<(f64, f64)> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let f = Frame::fit(&finite);
    let mut s = open(title, xlabel, ylabel, &f);
    for &(a, b) in &finite {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="steelblue"/>"#, f.px(a), f.py(b));
    }
    if let Some((slope, icpt)) = line {
        let (a0, a1) = f.x;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick"/>"#,
            f.px(a0),
            f.py(slope * a0 + icpt),
            f.px(a1),
            f.py(slope * a1 + icpt)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Polyline through `points` in order.
pub fn curve(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)]) -> String {
    let f = Frame::fit(points);
    let mut s = open(title, xlabel, ylabel, &f);
    let mut d = String::new();
    for (i, &(a, b)) in points.iter().enumerate() {
        let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, f.px(a), f.py(b));
    }
    let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="0.6"/>"#, d.trim_end());
    s.push_str("</svg>\n");
    s
}

/// Log-log scatter of holonomy samples.
pub fn holder_scatter(
    title: &str,
    samples: &[hlab_core::estimation::HolonomySample],
    fit: Option<(f64, f64)>,
) -> String {
    let pts: Vec<(f64, f64)> =
        samples.iter().filter(|s| s.d_in > 0.0 && s.d_out > 0.0).map(|s| (s.d_in.log10(), s.d_out.log10())).collect();
    // `fit` is (θ, H) for d_out = H·d_in^θ.
    let line = fit.map(|(theta, h)| (theta, h.log10()));
    scatter(title, "log10 d_in", "log10 d_out", &pts, line)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_enough() {
        let s = curve("t", "x", "y", &[(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("M56.00,344.00"));
        let s = scatter("t", "x", "y", &[(1.0, 1.0)], Some((1.0, 0.0)));
        assert_eq!(s.matches("<circle").count(), 1);
    }
}
