//! Standalone SVG rendering of a network layout.
//!
//! The drawing is a pure function of the layout: node circles sized by
//! to-degree, diverging fill by net connectedness (blue receivers, red
//! transmitters), and one curved arrow per directed table entry above the
//! threshold, with width proportional to the entry. Rendering the same layout
//! twice produces byte-identical files.

use std::path::Path;

use crate::error::{Error, Result};

use super::NetworkLayout;

const CANVAS: f64 = 1000.0;
const MARGIN_FRACTION: f64 = 0.05;
const MIN_RADIUS: f64 = 8.0;
const MAX_EXTRA_RADIUS: f64 = 22.0;

pub fn render_svg(layout: &NetworkLayout, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg_string(layout)).map_err(|e| Error::io(path, e))
}

pub fn render_svg_string(layout: &NetworkLayout) -> String {
    let n = layout.labels.len();

    // scale layout coordinates onto a fixed canvas
    let xs: Vec<f64> = layout.positions.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = layout.positions.iter().map(|p| p.1).collect();
    let (min_x, max_x) = bounds(&xs);
    let (min_y, max_y) = bounds(&ys);
    let span = (max_x - min_x).max(max_y - min_y).max(1e-9);
    let scale = CANVAS / span;
    let px: Vec<(f64, f64)> = layout
        .positions
        .iter()
        .map(|p| ((p.0 - min_x) * scale, (p.1 - min_y) * scale))
        .collect();

    let max_size = layout.node_sizes.iter().cloned().fold(0.0f64, f64::max);
    let radius: Vec<f64> = layout
        .node_sizes
        .iter()
        .map(|&s| {
            if max_size > 0.0 {
                MIN_RADIUS + MAX_EXTRA_RADIUS * s / max_size
            } else {
                MIN_RADIUS
            }
        })
        .collect();

    // viewport with margin around every circle
    let mut view_min_x = f64::INFINITY;
    let mut view_min_y = f64::INFINITY;
    let mut view_max_x = f64::NEG_INFINITY;
    let mut view_max_y = f64::NEG_INFINITY;
    for i in 0..n {
        view_min_x = view_min_x.min(px[i].0 - radius[i]);
        view_min_y = view_min_y.min(px[i].1 - radius[i] - 18.0); // room for the label
        view_max_x = view_max_x.max(px[i].0 + radius[i]);
        view_max_y = view_max_y.max(px[i].1 + radius[i]);
    }
    let margin = MARGIN_FRACTION * (view_max_x - view_min_x).max(view_max_y - view_min_y);
    let vx = view_min_x - margin;
    let vy = view_min_y - margin;
    let vw = view_max_x - view_min_x + 2.0 * margin;
    let vh = view_max_y - view_min_y + 2.0 * margin;

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\" width=\"900\" height=\"900\">\n",
        fmt(vx), fmt(vy), fmt(vw), fmt(vh)
    ));
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n",
        fmt(vx),
        fmt(vy),
        fmt(vw),
        fmt(vh)
    ));

    // directed arrows: entry d[i,j] is the flow j -> i
    let mut arrows: Vec<(usize, usize, f64)> = Vec::new();
    for e in &layout.edges {
        if e.a_from_b > layout.directed_threshold {
            arrows.push((e.b, e.a, e.a_from_b));
        }
        if e.b_from_a > layout.directed_threshold {
            arrows.push((e.a, e.b, e.b_from_a));
        }
    }
    let max_flow = arrows.iter().map(|a| a.2).fold(0.0f64, f64::max);
    for &(from, to, flow) in &arrows {
        out.push_str(&arrow_path(
            px[from],
            px[to],
            radius[from],
            radius[to],
            flow,
            max_flow,
        ));
    }

    let max_color = layout
        .node_colors
        .iter()
        .map(|c| c.abs())
        .fold(0.0f64, f64::max);
    for i in 0..n {
        let fill = diverging_color(layout.node_colors[i], max_color);
        out.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
            fmt(px[i].0),
            fmt(px[i].1),
            fmt(radius[i]),
            fill
        ));
    }
    for i in 0..n {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            fmt(px[i].0),
            fmt(px[i].1 - radius[i] - 5.0),
            escape_xml(&layout.labels[i])
        ));
    }
    out.push_str("</svg>\n");
    out
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Quadratic curve from the source circle border to the target border, bowed
/// perpendicular to the chord so the two directions of a pair never overlap,
/// plus a triangular head at the target end.
fn arrow_path(
    from: (f64, f64),
    to: (f64, f64),
    from_radius: f64,
    to_radius: f64,
    flow: f64,
    max_flow: f64,
) -> String {
    let dx = to.0 - from.0;
    let dy = to.1 - from.1;
    let chord = (dx * dx + dy * dy).sqrt().max(1e-9);
    let (ux, uy) = (dx / chord, dy / chord);
    let (perp_x, perp_y) = (-uy, ux);

    let width = 0.75 + 6.0 * if max_flow > 0.0 { flow / max_flow } else { 0.0 };
    let head = 6.0 + 1.5 * width;

    let start = (from.0 + ux * from_radius, from.1 + uy * from_radius);
    let end = (
        to.0 - ux * (to_radius + head),
        to.1 - uy * (to_radius + head),
    );
    let bend = 0.15 * chord;
    let control = (
        0.5 * (start.0 + end.0) + perp_x * bend,
        0.5 * (start.1 + end.1) + perp_y * bend,
    );

    // head orientation follows the curve tangent at its end
    let tx = end.0 - control.0;
    let ty = end.1 - control.1;
    let tlen = (tx * tx + ty * ty).sqrt().max(1e-9);
    let (tx, ty) = (tx / tlen, ty / tlen);
    let tip = (end.0 + tx * head, end.1 + ty * head);
    let left = (end.0 - ty * head * 0.4, end.1 + tx * head * 0.4);
    let right = (end.0 + ty * head * 0.4, end.1 - tx * head * 0.4);

    format!(
        "<path d=\"M {} {} Q {} {} {} {}\" fill=\"none\" stroke=\"#7a7a7a\" stroke-width=\"{}\" stroke-opacity=\"0.75\"/>\n\
         <polygon points=\"{},{} {},{} {},{}\" fill=\"#7a7a7a\" fill-opacity=\"0.75\"/>\n",
        fmt(start.0), fmt(start.1), fmt(control.0), fmt(control.1), fmt(end.0), fmt(end.1),
        fmt(width),
        fmt(tip.0), fmt(tip.1), fmt(left.0), fmt(left.1), fmt(right.0), fmt(right.1)
    )
}

/// White at zero, blue for receivers (negative net), red for transmitters.
fn diverging_color(value: f64, max_abs: f64) -> String {
    const WHITE: (f64, f64, f64) = (247.0, 247.0, 247.0);
    const BLUE: (f64, f64, f64) = (69.0, 117.0, 180.0);
    const RED: (f64, f64, f64) = (215.0, 48.0, 39.0);
    if max_abs <= 0.0 {
        return rgb(WHITE);
    }
    let t = (value / max_abs).clamp(-1.0, 1.0);
    let target = if t < 0.0 { BLUE } else { RED };
    let a = t.abs();
    rgb((
        WHITE.0 + a * (target.0 - WHITE.0),
        WHITE.1 + a * (target.1 - WHITE.1),
        WHITE.2 + a * (target.2 - WHITE.2),
    ))
}

fn rgb(c: (f64, f64, f64)) -> String {
    format!(
        "#{:02x}{:02x}{:02x}",
        c.0.round() as u8,
        c.1.round() as u8,
        c.2.round() as u8
    )
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
        .replace('\'', "&apos;")
}
