//! Minimal SVG figure emission: trace plots, densities, strategy bands.
//!
//! Figures are plain SVG text assembled by hand; no styling beyond a few
//! inline attributes, so the output stays small and diffable.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

struct Frame {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn from_data(xs: &[f64], ys: &[f64]) -> Frame {
        let span = |v: &[f64]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &x in v {
                if x.is_finite() {
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
            if !lo.is_finite() || lo == hi {
                (lo.min(0.0) - 0.5, hi.max(0.0) + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        let (xmin, xmax) = span(xs);
        let (ymin, ymax) = span(ys);
        Frame {
            xmin,
            xmax,
            ymin,
            ymax,
        }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.xmin) / (self.xmax - self.xmin) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN - (v - self.ymin) / (self.ymax - self.ymin) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn axes(frame: &Frame, out: &mut String) {
    let x0 = MARGIN;
    let x1 = WIDTH - MARGIN;
    let y0 = HEIGHT - MARGIN;
    let y1 = MARGIN;
    let _ = write!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = frame.xmin + f * (frame.xmax - frame.xmin);
        let yv = frame.ymin + f * (frame.ymax - frame.ymin);
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"11\">{:.3}</text>",
            frame.x(xv),
            y0 + 18.0,
            xv
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" \
             font-size=\"11\">{:.3}</text>",
            x0 - 6.0,
            frame.y(yv) + 4.0,
            yv
        );
    }
}

fn polyline(frame: &Frame, xs: &[f64], ys: &[f64], color: &str, width: f64, out: &mut String) {
    let mut points = String::new();
    for (&x, &y) in xs.iter().zip(ys) {
        let _ = write!(points, "{:.2},{:.2} ", frame.x(x), frame.y(y));
    }
    let _ = writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>",
        points.trim_end()
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Trace plot of one scalar chain.
pub fn trace_svg(title: &str, values: &[f64]) -> String {
    let xs: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
    let frame = Frame::from_data(&xs, values);
    let mut out = header(title);
    axes(&frame, &mut out);
    polyline(&frame, &xs, values, "#1f77b4", 0.8, &mut out);
    out.push_str("</svg>\n");
    out
}

/// Density curve (already evaluated on a grid).
pub fn density_svg(title: &str, grid: &[f64], density: &[f64]) -> String {
    let frame = Frame::from_data(grid, density);
    let mut out = header(title);
    axes(&frame, &mut out);
    polyline(&frame, grid, density, "#d62728", 1.5, &mut out);
    out.push_str("</svg>\n");
    out
}

/// Histogram of values with `bins` equal-width bins.
pub fn histogram_svg(title: &str, values: &[f64], bins: usize) -> String {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / w) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let max_count = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let frame = Frame {
        xmin: lo,
        xmax: hi,
        ymin: 0.0,
        ymax: max_count,
    };
    let mut out = header(title);
    axes(&frame, &mut out);
    for (b, &c) in counts.iter().enumerate() {
        let x0 = frame.x(lo + b as f64 * w);
        let x1 = frame.x(lo + (b + 1) as f64 * w);
        let y = frame.y(c as f64);
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"#1f77b4\" fill-opacity=\"0.7\" stroke=\"white\"/>",
            x0,
            y,
            x1 - x0,
            frame.y(0.0) - y
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Strategy band: pointwise mean with a shaded credible region, plus the
/// subject's observed (p, y) points.
pub fn band_svg(
    title: &str,
    grid: &[f64],
    mean: &[f64],
    lo: &[f64],
    hi: &[f64],
    data: &[(f64, f64)],
) -> String {
    let mut ally: Vec<f64> = Vec::new();
    ally.extend_from_slice(lo);
    ally.extend_from_slice(hi);
    ally.extend(data.iter().map(|d| d.1));
    ally.extend([0.0, 1.0]);
    let mut allx: Vec<f64> = grid.to_vec();
    allx.extend(data.iter().map(|d| d.0));
    let frame = Frame::from_data(&allx, &ally);
    let mut out = header(title);
    axes(&frame, &mut out);
    // shaded band as a closed polygon: hi left-to-right, lo right-to-left
    let mut points = String::new();
    for (&x, &y) in grid.iter().zip(hi) {
        let _ = write!(points, "{:.2},{:.2} ", frame.x(x), frame.y(y));
    }
    for (&x, &y) in grid.iter().rev().zip(lo.iter().rev()) {
        let _ = write!(points, "{:.2},{:.2} ", frame.x(x), frame.y(y));
    }
    let _ = writeln!(
        out,
        "<polygon points=\"{}\" fill=\"#1f77b4\" fill-opacity=\"0.25\" stroke=\"none\"/>",
        points.trim_end()
    );
    polyline(&frame, grid, mean, "#1f77b4", 1.5, &mut out);
    for &(x, y) in data {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#d62728\"/>",
            frame.x(x),
            frame.y(y)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Spaghetti plot: many thin curves over a common grid.
pub fn spaghetti_svg(title: &str, grid: &[f64], curves: &[Vec<f64>]) -> String {
    let mut ally: Vec<f64> = curves.iter().flatten().copied().collect();
    ally.extend([0.0, 1.0]);
    let frame = Frame::from_data(grid, &ally);
    let mut out = header(title);
    axes(&frame, &mut out);
    for curve in curves {
        polyline(&frame, grid, curve, "#1f77b4", 0.5, &mut out);
    }
    out.push_str("</svg>\n");
    out
}

/// Writes an SVG string to disk.
pub fn save_svg(svg: &str, path: &Path) -> Result<()> {
    std::fs::write(path, svg)?;
    Ok(())
}
