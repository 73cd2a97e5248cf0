//! Minimal static SVG plots: heatmaps and stacked line panels.

use std::fmt::Write;

const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

const LINE_COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

fn color(t: f64) -> String {
    if !t.is_finite() {
        return "#bbbbbb".into();
    }
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let k = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - k as f64;
    let (a, b) = (VIRIDIS[k], VIRIDIS[k + 1]);
    let mix = |x: f64, y: f64| (x + (y - x) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Heatmap of `z[i * ny + j]` over `x[i]`, `y[j]`.
pub fn heatmap(title: &str, x_label: &str, x: &[f64], y_label: &str, y: &[f64], z: &[f64]) -> String {
    let (nx, ny) = (x.len(), y.len());
    let (left, top, w, h) = (60.0, 30.0, 400.0, 400.0);
    let (cw, ch) = (w / nx as f64, h / ny as f64);
    let (lo, hi) = finite_range(z.iter().copied());
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="560" height="480" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="18">{}</text>"#, left, escape(title));
    for i in 0..nx {
        for j in 0..ny {
            let v = z[i * ny + j];
            let px = left + i as f64 * cw;
            let py = top + h - (j + 1) as f64 * ch;
            let _ = writeln!(
                s,
                r#"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                cw + 0.05,
                ch + 0.05,
                color((v - lo) / (hi - lo))
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{} [{:.3}, {:.3}]</text>"#,
        left + w / 2.0,
        top + h + 30.0,
        escape(x_label),
        x.first().copied().unwrap_or(0.0),
        x.last().copied().unwrap_or(0.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{} [{:.3}, {:.3}]</text>"#,
        top + h / 2.0,
        top + h / 2.0,
        escape(y_label),
        y.first().copied().unwrap_or(0.0),
        y.last().copied().unwrap_or(0.0)
    );
    for k in 0..=20 {
        let t = k as f64 / 20.0;
        let _ = writeln!(
            s,
            r#"<rect x="480" y="{:.2}" width="20" height="20.5" fill="{}"/>"#,
            top + h - (k + 1) as f64 * h / 21.0,
            color(t)
        );
    }
    let _ = writeln!(s, r#"<text x="505" y="{}">{:.4e}</text>"#, top + 10.0, hi);
    let _ = writeln!(s, r#"<text x="505" y="{}">{:.4e}</text>"#, top + h, lo);
    s.push_str("</svg>\n");
    s
}

/// One panel of a stacked line plot.
pub struct Panel<'a> {
    pub title: &'a str,
    pub series: Vec<(&'a str, Vec<f64>)>,
}

/// Vertically stacked line panels sharing the horizontal axis `x`.
pub fn line_panels(x_label: &str, x: &[f64], panels: &[Panel]) -> String {
    let (left, w, ph, gap) = (60.0, 600.0, 200.0, 50.0);
    let height = panels.len() as f64 * (ph + gap) + 40.0;
    let (x0, x1) = finite_range(x.iter().copied());
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="12">"#,
        left + w + 120.0
    );
    for (p, panel) in panels.iter().enumerate() {
        let top = 30.0 + p as f64 * (ph + gap);
        let (y0, y1) = finite_range(panel.series.iter().flat_map(|(_, v)| v.iter().copied()));
        let _ = writeln!(s, r#"<text x="{left}" y="{}">{}</text>"#, top - 8.0, escape(panel.title));
        let _ = writeln!(
            s,
            r##"<rect x="{left}" y="{top}" width="{w}" height="{ph}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(s, r#"<text x="5" y="{}">{:.3}</text>"#, top + 10.0, y1);
        let _ = writeln!(s, r#"<text x="5" y="{}">{:.3}</text>"#, top + ph, y0);
        for (k, (name, v)) in panel.series.iter().enumerate() {
            let mut pts = String::new();
            for (xi, yi) in x.iter().zip(v) {
                if !yi.is_finite() {
                    continue;
                }
                let px = left + (xi - x0) / (x1 - x0) * w;
                let py = top + ph - (yi - y0) / (y1 - y0) * ph;
                let _ = write!(pts, "{px:.2},{py:.2} ");
            }
            let col = LINE_COLORS[k % LINE_COLORS.len()];
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{col}" stroke-width="1" points="{}"/>"#,
                pts.trim_end()
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" fill="{col}">{}</text>"#,
                left + w + 10.0,
                top + 15.0 + 15.0 * k as f64,
                escape(name)
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{} [{:.3}, {:.3}]</text>"#,
        left + w / 2.0,
        height - 8.0,
        escape(x_label),
        x0,
        x1
    );
    s.push_str("</svg>\n");
    s
}
