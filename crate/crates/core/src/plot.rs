//! Self-contained SVG rendering of sweep curves: one panel per family, one
//! polyline per box size, `alpha` against `P_alpha`.

use std::fmt::Write;

use crate::sweep::{Family, SweepCurve};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Panels are laid out two per row in the order the families first appear.
pub fn render_svg(curves: &[SweepCurve]) -> String {
    let mut families: Vec<Family> = Vec::new();
    for c in curves {
        if !families.contains(&c.family) {
            families.push(c.family);
        }
    }
    let cols = families.len().clamp(1, 2);
    let rows = families.len().div_ceil(2).max(1);
    let width = PANEL_W * cols as f64;
    let height = PANEL_H * rows as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for (k, family) in families.iter().enumerate() {
        let ox = PANEL_W * (k % 2) as f64;
        let oy = PANEL_H * (k / 2) as f64;
        let own: Vec<&SweepCurve> = curves.iter().filter(|c| c.family == *family).collect();
        panel(&mut svg, *family, &own, ox, oy);
    }
    svg.push_str("</svg>\n");
    svg
}

fn panel(svg: &mut String, family: Family, curves: &[&SweepCurve], ox: f64, oy: f64) {
    let pts = curves.iter().flat_map(|c| c.points.iter());
    let (mut xmin, mut xmax, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for p in pts {
        xmin = xmin.min(p.alpha);
        xmax = xmax.max(p.alpha);
        ymax = ymax.max(p.triple.p_hat + p.triple.stderr);
    }
    if !xmin.is_finite() {
        (xmin, xmax) = (0.0, 0.25);
    }
    if xmax <= xmin {
        xmax = xmin + 1e-3;
    }
    let ymax = if ymax > 0.0 { ymax * 1.05 } else { 1.0 };
    let (x0, x1) = (ox + MARGIN_L, ox + PANEL_W - MARGIN_R);
    let (y0, y1) = (oy + PANEL_H - MARGIN_B, oy + MARGIN_T);
    let sx = |a: f64| x0 + (a - xmin) / (xmax - xmin) * (x1 - x0);
    let sy = |p: f64| y0 - p / ymax * (y0 - y1);

    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-weight="bold">{} (p_c = {:.4})</text>"#,
        (x0 + x1) / 2.0,
        oy + 20.0,
        family.name(),
        family.p_c()
    );
    let _ = writeln!(
        svg,
        r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let a = xmin + (xmax - xmin) * i as f64 / 4.0;
        let p = ymax * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{a:.3}</text>"#,
            sx(a),
            y0 + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{p:.3}</text>"#,
            x0 - 6.0,
            sy(p) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">α</text>"#,
        (x0 + x1) / 2.0,
        y0 + 36.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">P_α</text>"#,
        ox + 16.0,
        (y0 + y1) / 2.0,
        ox + 16.0,
        (y0 + y1) / 2.0
    );
    let bound = family.alpha_bound();
    if (xmin..=xmax).contains(&bound) {
        let _ = writeln!(
            svg,
            r##"<line x1="{b:.1}" y1="{y0:.1}" x2="{b:.1}" y2="{y1:.1}" stroke="#888" stroke-dasharray="4 3"/>"##,
            b = sx(bound)
        );
    }
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = c
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.alpha), sy(p.triple.p_hat)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">L = {}</text>"#,
            x0 + 8.0,
            y1 + 14.0 * (i + 1) as f64,
            c.size
        );
    }
}
