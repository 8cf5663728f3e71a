//! Static SVG line plots of monitor series.

use std::fmt::Write as _;

use levolve_core::io::fmt_g17;
use levolve_core::monitors::MonitorSeries;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One polyline over the abscissa, framed with the value range and verdict.
pub fn svg_polyline(title: &str, s: &MonitorSeries) -> String {
    let finite: Vec<(f64, f64)> =
        s.abscissa.iter().zip(&s.values).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| (*x, *y)).collect();
    let span = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-300 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = span(&mut finite.iter().map(|p| p.0));
    let (y0, y1) = span(&mut finite.iter().map(|p| p.1));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="gray"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="32" font-family="sans-serif" font-size="15">{} ({}, {})</text>"#,
        escape(title),
        escape(&s.property.label()),
        if s.passed { "pass" } else { "FAIL" }
    );
    let label = |x: f64, y: f64, anchor: &str, text: String| {
        format!(r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{text}</text>"#)
    };
    let _ = writeln!(out, "{}", label(MARGIN - 6.0, MARGIN + 4.0, "end", fmt_g17(y1)));
    let _ = writeln!(out, "{}", label(MARGIN - 6.0, HEIGHT - MARGIN, "end", fmt_g17(y0)));
    let _ = writeln!(out, "{}", label(MARGIN, HEIGHT - MARGIN + 16.0, "start", fmt_g17(x0)));
    let _ = writeln!(out, "{}", label(WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "end", fmt_g17(x1)));
    let _ = writeln!(
        out,
        "{}",
        label(WIDTH / 2.0, HEIGHT - 14.0, "middle", escape(s.abscissa_kind.label()))
    );
    let points: Vec<String> = finite.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        points.join(" ")
    );
    for &(x, y) in &finite {
        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, px(x), py(y));
    }
    out.push_str("</svg>\n");
    out
}
