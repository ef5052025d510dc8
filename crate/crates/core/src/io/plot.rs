use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_bytes, IoError, VIRIDIS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapOptions {
    /// Pixel size of one grid cell.
    pub cell_width: f64,
    pub cell_height: f64,
    pub title: Option<String>,
    /// Color range; the field's own min and max when absent.
    pub range: Option<(f32, f32)>,
}

impl Default for HeatmapOptions {
    fn default() -> Self {
        Self { cell_width: 2.0, cell_height: 4.0, title: None, range: None }
    }
}

fn color_index(v: f32, lo: f32, hi: f32) -> usize {
    if hi <= lo {
        return 128;
    }
    (((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 255.0).round() as usize
}

fn hex(c: usize) -> String {
    let [r, g, b] = VIRIDIS[c];
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// SVG of a row-major `[n_t, n_x]` field: x to the right, t upward, with a
/// colorbar. Horizontal runs of one color share a rectangle.
pub fn heatmap_svg(field: &[f32], n_t: usize, n_x: usize, opts: &HeatmapOptions) -> Result<String, String> {
    if field.len() != n_t * n_x || n_t == 0 || n_x == 0 {
        return Err(format!("field has {} values, expected {n_t} x {n_x}", field.len()));
    }
    if let Some(i) = field.iter().position(|v| !v.is_finite()) {
        return Err(format!("non-finite value at index {i}"));
    }
    let (lo, hi) = opts.range.unwrap_or_else(|| {
        field.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    });
    let (cw, ch) = (opts.cell_width, opts.cell_height);
    let (left, top, bottom) = (40.0, if opts.title.is_some() { 30.0 } else { 10.0 }, 30.0);
    let plot_w = cw * n_x as f64;
    let plot_h = ch * n_t as f64;
    let bar_x = left + plot_w + 15.0;
    let width = bar_x + 70.0;
    let height = top + plot_h + bottom;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" shape-rendering="crispEdges" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    if let Some(t) = &opts.title {
        let t = t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{t}</text>"#, left + plot_w / 2.0);
    }
    let _ = writeln!(s, "<g>");
    for ti in 0..n_t {
        let y = top + ch * (n_t - 1 - ti) as f64;
        let row = &field[ti * n_x..(ti + 1) * n_x];
        let mut j = 0;
        while j < n_x {
            let c = color_index(row[j], lo, hi);
            let mut k = j + 1;
            while k < n_x && color_index(row[k], lo, hi) == c {
                k += 1;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{}" height="{ch}" fill="{}"/>"#,
                left + cw * j as f64,
                cw * (k - j) as f64,
                hex(c)
            );
            j = k;
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">x</text>"#, left + plot_w / 2.0, top + plot_h + 22.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, left - 25.0, top + plot_h / 2.0);
    let bar_h = plot_h / 256.0;
    let _ = writeln!(s, "<g>");
    for c in 0..256 {
        let y = top + plot_h - bar_h * (c + 1) as f64;
        let _ = writeln!(s, r#"<rect x="{bar_x}" y="{y:.3}" width="15" height="{:.3}" fill="{}"/>"#, bar_h + 0.01, hex(c));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<text x="{}" y="{}">{hi:.4}</text>"#, bar_x + 20.0, top + 10.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}">{lo:.4}</text>"#, bar_x + 20.0, top + plot_h);
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn export_heatmap(path: &Path, field: &[f32], n_t: usize, n_x: usize, opts: &HeatmapOptions) -> Result<(), IoError> {
    let svg = heatmap_svg(field, n_t, n_x, opts).map_err(|detail| IoError::Incompatible { path: path.into(), detail })?;
    write_bytes(path, svg.as_bytes())
}
