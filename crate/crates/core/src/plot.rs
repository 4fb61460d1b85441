//! Self-contained SVG density plots: a sample histogram heatmap with the
//! training data and quality contours drawn on top.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::quality::{Domain, Point, QualityFunction};
use crate::{Error, Result};

pub const DENSITY_BINS: usize = 64;
pub const CONTOUR_LEVELS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
pub const MAX_SCATTER_POINTS: usize = 1000;

const CANVAS: f64 = 512.0;
const MARGIN: f64 = 24.0;
const CONTOUR_RESOLUTION: usize = 128;

/// Histogram counts on a `bins × bins` grid, indexed `[ix][iy]`.
///
/// Samples outside the domain are counted in the nearest edge bin, so the
/// counts always sum to the number of samples.
pub fn histogram(samples: &[Point], domain: &Domain, bins: usize) -> Vec<Vec<usize>> {
    let mut counts = vec![vec![0usize; bins]; bins];
    let index = |v: f64, lo: f64, hi: f64| -> usize {
        let f = ((v - lo) / (hi - lo) * bins as f64).floor();
        if f.is_nan() || f < 0.0 {
            0
        } else {
            (f as usize).min(bins - 1)
        }
    };
    for s in samples {
        let ix = index(s[0], domain.min[0], domain.max[0]);
        let iy = index(s[1], domain.min[1], domain.max[1]);
        counts[ix][iy] += 1;
    }
    counts
}

/// Machine-readable summary embedded in the SVG `<metadata>` element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMetadata {
    pub bins: usize,
    pub total: usize,
    /// Non-empty bins as `[ix, iy, count]`.
    pub counts: Vec<[usize; 3]>,
}

/// Extracts the metadata block from an SVG produced by [`render_density_svg`].
pub fn parse_metadata(svg: &str) -> Result<DensityMetadata> {
    let start = svg
        .find("<metadata>")
        .ok_or_else(|| Error::InvalidInput("svg has no metadata".into()))?
        + "<metadata>".len();
    let end = svg[start..]
        .find("</metadata>")
        .ok_or_else(|| Error::InvalidInput("unterminated metadata".into()))?;
    Ok(serde_json::from_str(svg[start..start + end].trim())?)
}

struct Frame {
    domain: Domain,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.domain.min[0]) / (self.domain.max[0] - self.domain.min[0]) * CANVAS
    }

    fn py(&self, y: f64) -> f64 {
        MARGIN + (self.domain.max[1] - y) / (self.domain.max[1] - self.domain.min[1]) * CANVAS
    }
}

/// White to dark blue.
fn heat_color(intensity: f64) -> String {
    let t = intensity.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(255.0, 8.0),
        lerp(255.0, 48.0),
        lerp(255.0, 107.0)
    )
}

/// Line segments of the `level` isoline of `f` over the domain.
pub fn contour_segments<F: Fn(&Point) -> f64>(
    f: F,
    domain: &Domain,
    resolution: usize,
    level: f64,
) -> Vec<[Point; 2]> {
    let n = resolution;
    let dx = (domain.max[0] - domain.min[0]) / n as f64;
    let dy = (domain.max[1] - domain.min[1]) / n as f64;
    let node = |i: usize, j: usize| [domain.min[0] + i as f64 * dx, domain.min[1] + j as f64 * dy];
    let values: Vec<Vec<f64>> = (0..=n)
        .map(|i| (0..=n).map(|j| f(&node(i, j))).collect())
        .collect();

    let mut segments = Vec::new();
    for i in 0..n {
        for j in 0..n {
            // corners counter-clockwise from bottom-left
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v: Vec<f64> = corners.iter().map(|&(a, b)| values[a][b]).collect();
            let mut crossings = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if (v[a] >= level) != (v[b] >= level) {
                    let t = (level - v[a]) / (v[b] - v[a]);
                    let pa = node(corners[a].0, corners[a].1);
                    let pb = node(corners[b].0, corners[b].1);
                    crossings.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                }
            }
            match crossings.len() {
                2 => segments.push([crossings[0], crossings[1]]),
                4 => {
                    // saddle: pair edges according to the cell-center value
                    let center = v.iter().sum::<f64>() / 4.0;
                    if (center >= level) == (v[0] >= level) {
                        segments.push([crossings[0], crossings[3]]);
                        segments.push([crossings[1], crossings[2]]);
                    } else {
                        segments.push([crossings[0], crossings[1]]);
                        segments.push([crossings[2], crossings[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

/// Renders the density plot as an SVG document.
pub fn render_density_svg(
    samples: &[Point],
    training: &[Point],
    quality: &dyn QualityFunction,
    domain: &Domain,
    title: &str,
) -> Result<String> {
    if samples.is_empty() {
        return Err(Error::InvalidInput(
            "cannot plot an empty sample set".into(),
        ));
    }
    domain.validate()?;
    let frame = Frame { domain: *domain };
    let counts = histogram(samples, domain, DENSITY_BINS);
    let max = counts.iter().flatten().copied().max().unwrap_or(0).max(1);
    let cell_w = CANVAS / DENSITY_BINS as f64;
    let size = CANVAS + 2.0 * MARGIN;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let meta = DensityMetadata {
        bins: DENSITY_BINS,
        total: samples.len(),
        counts: counts
            .iter()
            .enumerate()
            .flat_map(|(ix, col)| {
                col.iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(move |(iy, &c)| [ix, iy, c])
            })
            .collect(),
    };
    let _ = writeln!(
        svg,
        "<metadata>{}</metadata>",
        serde_json::to_string(&meta)?
    );
    let _ = writeln!(svg, "<title>{}</title>", escape(title));
    let _ = writeln!(
        svg,
        r##"<rect id="background" x="{MARGIN}" y="{MARGIN}" width="{CANVAS}" height="{CANVAS}" fill="#ffffff" stroke="#000000"/>"##
    );

    let _ = writeln!(svg, r#"<g id="heatmap">"#);
    for &[ix, iy, c] in &meta.counts {
        let x = MARGIN + ix as f64 * cell_w;
        let y = MARGIN + (DENSITY_BINS - 1 - iy) as f64 * cell_w;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{cell_w:.3}" height="{cell_w:.3}" fill="{}"/>"#,
            heat_color(c as f64 / max as f64)
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(
        svg,
        r##"<g id="training" fill="#d62728" fill-opacity="0.5">"##
    );
    let stride = training.len().div_ceil(MAX_SCATTER_POINTS).max(1);
    for p in training.iter().step_by(stride) {
        if domain.contains(p) {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="1.2"/>"#,
                frame.px(p[0]),
                frame.py(p[1])
            );
        }
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(
        svg,
        r##"<g id="contours" fill="none" stroke="#2ca02c" stroke-width="1">"##
    );
    for level in CONTOUR_LEVELS {
        let segs = contour_segments(|x| quality.evaluate(x), domain, CONTOUR_RESOLUTION, level);
        let mut d = String::new();
        for [a, b] in segs {
            let _ = write!(
                d,
                "M{:.2} {:.2}L{:.2} {:.2}",
                frame.px(a[0]),
                frame.py(a[1]),
                frame.px(b[0]),
                frame.py(b[1])
            );
        }
        let _ = writeln!(svg, r#"<path data-level="{level}" d="{d}"/>"#);
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Writes [`render_density_svg`] output to `path`.
pub fn plot_density(
    path: &Path,
    samples: &[Point],
    training: &[Point],
    quality: &dyn QualityFunction,
    domain: &Domain,
    title: &str,
) -> Result<()> {
    let svg = render_density_svg(samples, training, quality, domain, title)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
