//! Raster (PPM) and vector (SVG) renderings of a height map with an
//! optional plan overlay. Heights ramp linearly from blue at the minimum to
//! red at the maximum; unobserved cells are gray. North (max y) is up.

use std::fmt::Write as _;
use std::path::Path;

use crate::gridmap::HeightMap;
use crate::transport::MoveRecord;

const UNOBSERVED: [u8; 3] = [128, 128, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Ppm,
    Svg,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Option<ImageFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ppm" => Some(ImageFormat::Ppm),
            "svg" => Some(ImageFormat::Svg),
            _ => None,
        }
    }
}

/// Min and max observed height, if any cell is observed.
pub fn height_range(map: &HeightMap) -> Option<(f64, f64)> {
    map.cells().iter().filter(|c| c.observed).fold(None, |acc, c| match acc {
        None => Some((c.height, c.height)),
        Some((lo, hi)) => Some((c.height.min(lo), c.height.max(hi))),
    })
}

pub fn ramp(h: f64, min: f64, max: f64) -> [u8; 3] {
    let t = if max > min { ((h - min) / (max - min)).clamp(0.0, 1.0) } else { 0.5 };
    let r = (255.0 * t).round() as u8;
    [r, 0, 255 - r]
}

fn cell_color(map: &HeightMap, col: usize, row: usize, range: Option<(f64, f64)>) -> [u8; 3] {
    let c = &map.cells()[map.index(col, row)];
    match range {
        Some((lo, hi)) if c.observed => ramp(c.height, lo, hi),
        _ => UNOBSERVED,
    }
}

fn legend(range: Option<(f64, f64)>) -> String {
    match range {
        Some((lo, hi)) => format!("min {lo:.4} m (blue) max {hi:.4} m (red)"),
        None => "no observed cells".to_string(),
    }
}

/// Binary P6 image, `scale` pixels per cell side. The legend is stored as a
/// header comment and returned.
pub fn render_ppm(map: &HeightMap, scale: usize) -> (Vec<u8>, String) {
    let scale = scale.max(1);
    let range = height_range(map);
    let legend = legend(range);
    let (w, h) = (map.width() * scale, map.height() * scale);
    let mut out = format!("P6\n# {legend}\n{w} {h}\n255\n").into_bytes();
    out.reserve(w * h * 3);
    for row in (0..map.height()).rev() {
        let line: Vec<u8> = (0..map.width())
            .flat_map(|col| {
                let rgb = cell_color(map, col, row, range);
                std::iter::repeat(rgb).take(scale).flatten()
            })
            .collect();
        for _ in 0..scale {
            out.extend_from_slice(&line);
        }
    }
    (out, legend)
}

/// SVG with the map as rectangles (runs of equal color merged per row) and
/// one `class="move"` arrow per move.
pub fn render_svg(map: &HeightMap, moves: &[MoveRecord], scale: usize) -> (String, String) {
    let scale = scale.max(1) as f64;
    let range = height_range(map);
    let legend = legend(range);
    let (cols, rows) = (map.width(), map.height());
    let (w, h) = (cols as f64 * scale, rows as f64 * scale);
    let (ox, oy) = map.origin();
    let res = map.resolution();
    let px = |x: f64| ((x - ox) / res + 0.5) * scale;
    let py = |y: f64| (rows as f64 - ((y - oy) / res + 0.5)) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}" viewBox="0 0 {w} {}">"#,
        h + 20.0,
        h + 20.0
    );
    s.push_str(concat!(
        r#"<defs><marker id="head" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto">"#,
        r#"<path d="M0,0 L10,5 L0,10 z" fill="white"/></marker></defs>"#,
        "\n"
    ));
    s.push_str("<g class=\"map\" shape-rendering=\"crispEdges\">\n");
    for row in 0..rows {
        let y = (rows - 1 - row) as f64 * scale;
        let mut col = 0;
        while col < cols {
            let rgb = cell_color(map, col, row, range);
            let mut end = col + 1;
            while end < cols && cell_color(map, end, row, range) == rgb {
                end += 1;
            }
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{y}" width="{}" height="{scale}" fill="#{:02x}{:02x}{:02x}"/>"##,
                col as f64 * scale,
                (end - col) as f64 * scale,
                rgb[0],
                rgb[1],
                rgb[2]
            );
            col = end;
        }
    }
    s.push_str("</g>\n");
    for m in moves {
        let _ = writeln!(
            s,
            r#"<line class="move" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="white" stroke-width="1.5" marker-end="url(#head)"/>"#,
            px(m.src[0]),
            py(m.src[1]),
            px(m.dst[0]),
            py(m.dst[1])
        );
    }
    let _ = writeln!(s, r#"<text class="legend" x="2" y="{}" font-size="12">{legend}</text>"#, h + 15.0);
    s.push_str("</svg>\n");
    (s, legend)
}
