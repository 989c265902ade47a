//! Minimal line-chart SVG: axes, one polyline per series, shaded ±1 std band.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const W: f64 = 720.0;
const H: f64 = 440.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 160.0;
const PAD_T: f64 = 30.0;
const PAD_B: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Renders the series against a shared x axis.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y0, y1) = range(series.iter().flat_map(|s| {
        s.mean.iter().zip(&s.std).flat_map(|(m, d)| [m - d, m + d])
    }));
    let px = |x: f64| PAD_L + (x - x0) / (x1 - x0) * (W - PAD_L - PAD_R);
    let py = |y: f64| H - PAD_B - (y - y0) / (y1 - y0) * (H - PAD_T - PAD_B);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" font-size="14" text-anchor="middle">{}</text>"#, (W - PAD_R + PAD_L) / 2.0, escape(title));
    let (ax, ay) = (px(x0), py(y0));
    let _ = writeln!(out, r#"<line x1="{ax:.2}" y1="{ay:.2}" x2="{:.2}" y2="{ay:.2}" stroke="black"/>"#, px(x1));
    let _ = writeln!(out, r#"<line x1="{ax:.2}" y1="{ay:.2}" x2="{ax:.2}" y2="{:.2}" stroke="black"/>"#, py(y1));
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#, px(xv), ay + 15.0, fmt_tick(xv));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{}</text>"#, ax - 5.0, py(yv) + 3.0, fmt_tick(yv));
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#, (ax + px(x1)) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (ay + py(y1)) / 2.0,
        (ay + py(y1)) / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64, f64)> = s
            .x
            .iter()
            .zip(&s.mean)
            .zip(&s.std)
            .filter(|((x, m), d)| x.is_finite() && m.is_finite() && d.is_finite())
            .map(|((x, m), d)| (*x, *m, *d))
            .collect();
        if pts.iter().any(|p| p.2 > 0.0) {
            let mut poly = String::new();
            for &(x, m, d) in &pts {
                let _ = write!(poly, "{:.2},{:.2} ", px(x), py(m + d));
            }
            for &(x, m, d) in pts.iter().rev() {
                let _ = write!(poly, "{:.2},{:.2} ", px(x), py(m - d));
            }
            let _ = writeln!(out, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.trim_end());
        }
        let line: Vec<String> = pts.iter().map(|&(x, m, _)| format!("{:.2},{:.2}", px(x), py(m))).collect();
        let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = PAD_T + 18.0 * i as f64 + 10.0;
        let lx = W - PAD_R + 15.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="11">{}</text>"#, lx + 25.0, ly + 4.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_series_and_band() {
        let s = Series { label: "a<b".into(), x: vec![0.0, 1.0, 2.0], mean: vec![1.0, 2.0, 3.0], std: vec![0.1, 0.2, f64::NAN] };
        let svg = line_chart("t", "x", "y", &[s.clone(), Series { std: vec![0.0; 3], ..s }]);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 1);
        assert!(svg.contains("a&lt;b"));
    }

    #[test]
    fn empty_chart_is_valid() {
        assert!(line_chart("t", "x", "y", &[]).ends_with("</svg>\n"));
    }
}
