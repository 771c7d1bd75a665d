//! Static SVG line plots.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 300.0;
const PAD: f64 = 40.0;
const COLORS: [&str; 4] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd"];

/// Ground truth in black with each prediction series overlaid, by segment index.
pub fn trace_svg(truth: &[f64], series: &[(&str, &[f64])]) -> String {
    let all = truth
        .iter()
        .chain(series.iter().flat_map(|(_, s)| s.iter()))
        .copied();
    let (lo, hi) = all
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let (lo, hi) = if lo < hi {
        (lo, hi)
    } else {
        (lo - 1.0, lo + 1.0)
    };
    let n = truth.len().max(2) - 1;
    let x = |i: usize| PAD + (WIDTH - 2.0 * PAD) * i as f64 / n as f64;
    let y = |v: f64| HEIGHT - PAD - (HEIGHT - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<path d="M{PAD} {PAD} V{b} H{r}" fill="none" stroke="#888"/>"##,
        b = HEIGHT - PAD,
        r = WIDTH - PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="{}" font-size="11" font-family="sans-serif">{hi:.3}</text>"#,
        PAD - 4.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{PAD}" y="{}" font-size="11" font-family="sans-serif">{lo:.3}</text>"#,
        HEIGHT - PAD + 14.0
    );
    let line = |svg: &mut String, values: &[f64], color: &str| {
        let pts: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            pts.join(" ")
        );
    };
    line(&mut svg, truth, "black");
    for (k, (_, s)) in series.iter().enumerate() {
        line(&mut svg, s, COLORS[k % COLORS.len()]);
    }
    let legend = std::iter::once(("truth", "black")).chain(
        series
            .iter()
            .enumerate()
            .map(|(k, (name, _))| (*name, COLORS[k % COLORS.len()])),
    );
    for (k, (name, color)) in legend.enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="20" font-size="12" font-family="sans-serif" fill="{color}">{name}</text>"#,
            PAD + 110.0 * k as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}
