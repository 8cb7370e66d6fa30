//! Minimal SVG renderings of density grids. Presentation only: the CSV grids
//! are the canonical output.

use std::fmt::Write as _;

use crate::analysis::DensityGrid;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

/// Number of shading levels in 2-D plots.
pub const LEVELS: usize = 10;

fn open(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axis_labels(out: &mut String, x: (f64, f64), y: Option<(f64, f64)>) {
    let bottom = HEIGHT - MARGIN;
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="11">{:.3}</text>"#,
        bottom + 16.0,
        x.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{:.3}</text>"#,
        WIDTH - MARGIN,
        bottom + 16.0,
        x.1
    );
    if let Some((lo, hi)) = y {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{bottom}" font-family="sans-serif" font-size="11" text-anchor="end">{lo:.3}</text>"#,
            MARGIN - 4.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{hi:.3}</text>"#,
            MARGIN - 4.0,
            MARGIN + 8.0
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Polyline of a 1-D grid.
pub fn line_plot(grid: &DensityGrid, title: &str) -> String {
    let axis = grid.axes[0];
    let top = grid
        .masses
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let mut out = String::new();
    open(&mut out, title);
    let points: Vec<String> = grid
        .masses
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let x = MARGIN + (i as f64 + 0.5) / axis.bins as f64 * pw;
            let y = HEIGHT - MARGIN - m / top * ph;
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#,
        points.join(" ")
    );
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{b}" x2="{}" y2="{b}" stroke="gray"/>"#,
        WIDTH - MARGIN,
        b = HEIGHT - MARGIN
    );
    axis_labels(&mut out, (axis.min, axis.max), None);
    out.push_str("</svg>\n");
    out
}

/// Cells of a 2-D grid shaded in [`LEVELS`] equal-height bands.
pub fn level_plot(grid: &DensityGrid, title: &str) -> String {
    let (xa, ya) = (grid.axes[0], grid.axes[1]);
    let top = grid
        .masses
        .iter()
        .cloned()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let (cw, ch) = (
        (WIDTH - 2.0 * MARGIN) / xa.bins as f64,
        (HEIGHT - 2.0 * MARGIN) / ya.bins as f64,
    );
    let mut out = String::new();
    open(&mut out, title);
    for ix in 0..xa.bins {
        for iy in 0..ya.bins {
            let level = ((grid.at(ix, iy) / top) * LEVELS as f64).ceil() as usize;
            if level == 0 {
                continue;
            }
            let shade = 255 - (level.min(LEVELS) * 225 / LEVELS) as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},255)"/>"#,
                MARGIN + ix as f64 * cw,
                HEIGHT - MARGIN - (iy + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    axis_labels(&mut out, (xa.min, xa.max), Some((ya.min, ya.max)));
    out.push_str("</svg>\n");
    out
}
