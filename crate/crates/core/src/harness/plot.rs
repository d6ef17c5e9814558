//! Bare-bones SVG line plot of sweep means.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;

use super::experiment::ExperimentResult;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline per series of mean utility against the swept value.
pub fn write_svg<W2: Write>(result: &ExperimentResult, mut out: W2) -> Result<()> {
    let curves: Vec<(String, Vec<(f64, f64)>)> = result
        .schemes()
        .into_iter()
        .map(|s| {
            let c = result.curve(&s);
            (s, c)
        })
        .filter(|(_, c)| !c.is_empty())
        .collect();
    let pts = curves.iter().flat_map(|(_, c)| c.iter().copied());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{PAD},{top} V{bottom} H{right}" stroke="black" fill="none"/>"#,
        top = PAD,
        bottom = H - PAD,
        right = W - PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 15.0,
        escape(&result.param_name)
    );
    let _ = writeln!(svg, r#"<text x="{}" y="25" text-anchor="middle">{}</text>"#, W / 2.0, escape(&result.preset));
    for (v, y) in [(y0, sy(y0)), (y1, sy(y1))] {
        let _ = writeln!(svg, r#"<text x="{}" y="{y:.1}" text-anchor="end">{v:.3e}</text>"#, PAD - 5.0);
    }
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{}" text-anchor="middle">{v}</text>"#, H - PAD + 16.0);
    }
    for (i, (name, c)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = c.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" stroke="{color}" fill="none" stroke-width="2"/>"#,
            points.join(" ")
        );
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            W - PAD - 150.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    out.write_all(svg.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::ResultRow;

    #[test]
    fn one_polyline_per_series() {
        let row = |scheme: &str, param: f64| ResultRow {
            scheme: scheme.into(),
            param,
            seed: 0,
            utility: Some(param * 2.0),
            status: "converged".into(),
            runtime_s: 0.0,
        };
        let r = ExperimentResult {
            preset: "demo".into(),
            param_name: "num_vues".into(),
            rows: vec![row("a", 1.0), row("a", 2.0), row("b<", 1.0)],
        };
        let mut buf = Vec::new();
        write_svg(&r, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("<svg"));
        assert_eq!(text.matches("<polyline").count(), 2);
        assert!(text.contains("b&lt;"));
    }
}
