//! Height map files.
//!
//! CSV: the first line is `width,height,resolution`; it is followed by
//! `height` lines of `width` comma-separated heights in meters, the first
//! of them being the row at minimum y. An empty field is an unobserved cell.
//!
//! PGM: binary (P5) or ASCII (P2) grayscale. The top image row is the row
//! at maximum y; each pixel value times `scale` is a height in meters.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{CellState, GridError, HeightMap, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFormat {
    Csv,
    Pgm,
}

impl MapFormat {
    pub fn from_path(path: &Path) -> Option<MapFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(MapFormat::Csv),
            "pgm" => Some(MapFormat::Pgm),
            _ => None,
        }
    }
}

impl FromStr for MapFormat {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(MapFormat::Csv),
            "pgm" => Ok(MapFormat::Pgm),
            other => Err(GridError::Argument(format!("unknown map format '{other}'"))),
        }
    }
}

/// Reads a height map.
///
/// `resolution` overrides the CSV header value and is required for PGM,
/// which carries no geometry.
pub fn load_heightmap(
    path: &Path,
    format: MapFormat,
    scale: f64,
    resolution: Option<f64>,
) -> Result<HeightMap> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(GridError::Argument(format!("scale must be positive, got {scale}")));
    }
    if let Some(r) = resolution {
        if !(r > 0.0) || !r.is_finite() {
            return Err(GridError::Argument(format!("resolution must be positive, got {r}")));
        }
    }
    let bytes = fs::read(path)?;
    match format {
        MapFormat::Csv => {
            let text = String::from_utf8(bytes).map_err(|e| GridError::ParseBytes {
                offset: e.utf8_error().valid_up_to(),
                message: "file is not valid UTF-8".into(),
            })?;
            parse_csv(&text, scale, resolution)
        }
        MapFormat::Pgm => {
            let resolution = resolution.ok_or_else(|| {
                GridError::Argument("PGM maps need an explicit resolution".into())
            })?;
            parse_pgm(&bytes, scale, resolution)
        }
    }
}

/// Writes a height map. For PGM every height must map to a pixel value in
/// `0..=65535` after division by `scale`; unobserved cells are written as 0.
pub fn save_heightmap(map: &HeightMap, path: &Path, format: MapFormat, scale: f64) -> Result<()> {
    let bytes = match format {
        MapFormat::Csv => write_csv(map).into_bytes(),
        MapFormat::Pgm => write_pgm(map, scale)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub(crate) fn parse_csv(text: &str, scale: f64, resolution: Option<f64>) -> Result<HeightMap> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (line_no, header) = lines.next().ok_or(GridError::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(GridError::Parse {
            line: line_no,
            message: format!("header needs width,height,resolution; found {} fields", fields.len()),
        });
    }
    let parse_dim = |s: &str, what: &str| {
        s.parse::<usize>().map_err(|_| GridError::Parse {
            line: line_no,
            message: format!("bad {what} '{s}'"),
        })
    };
    let width = parse_dim(fields[0], "width")?;
    let height = parse_dim(fields[1], "height")?;
    let header_res = fields[2].parse::<f64>().map_err(|_| GridError::Parse {
        line: line_no,
        message: format!("bad resolution '{}'", fields[2]),
    })?;
    let resolution = resolution.unwrap_or(header_res);

    let mut cells = Vec::with_capacity(width * height);
    for row in 0..height {
        let (line_no, line) = lines.next().ok_or(GridError::Parse {
            line: row + 2,
            message: format!("expected {height} data rows, found {row}"),
        })?;
        let before = cells.len();
        for field in line.split(',') {
            let field = field.trim();
            if field.is_empty() {
                cells.push(CellState::UNOBSERVED);
                continue;
            }
            let v = field.parse::<f64>().map_err(|_| GridError::Parse {
                line: line_no,
                message: format!("bad height '{field}'"),
            })?;
            if !v.is_finite() {
                return Err(GridError::Parse {
                    line: line_no,
                    message: format!("height '{field}' is not finite"),
                });
            }
            cells.push(CellState::exact(v * scale));
        }
        if cells.len() - before != width {
            return Err(GridError::Parse {
                line: line_no,
                message: format!("expected {width} values, found {}", cells.len() - before),
            });
        }
    }
    if let Some((line_no, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(GridError::Parse {
            line: line_no,
            message: format!("unexpected trailing data '{extra}'"),
        });
    }
    HeightMap::from_cells(width, height, resolution, (0.0, 0.0), cells)
}

pub(crate) fn write_csv(map: &HeightMap) -> String {
    let mut out = format!("{},{},{}\n", map.width(), map.height(), map.resolution());
    for row in 0..map.height() {
        for col in 0..map.width() {
            if col > 0 {
                out.push(',');
            }
            let cell = &map.cells()[map.index(col, row)];
            if cell.observed {
                write!(out, "{}", cell.height).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmCursor<'_> {
    fn error(&self, message: impl Into<String>) -> GridError {
        GridError::ParseBytes {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("unexpected end of file"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| GridError::ParseBytes {
            offset: start,
            message: "non-ASCII header token".into(),
        })
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let start = self.pos;
        let tok = self.token()?;
        tok.parse::<usize>().map_err(|_| GridError::ParseBytes {
            offset: start,
            message: format!("bad {what} '{tok}'"),
        })
    }
}

pub(crate) fn parse_pgm(bytes: &[u8], scale: f64, resolution: f64) -> Result<HeightMap> {
    let mut cur = PgmCursor { bytes, pos: 0 };
    let magic = cur.token()?.to_owned();
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(GridError::ParseBytes { offset: 0, message: format!("unsupported magic '{other}'") }),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(cur.error(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| cur.error("image dimensions overflow"))?;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(cur.error("missing whitespace before raster"));
        }
        cur.pos += 1;
        let depth = if maxval < 256 { 1 } else { 2 };
        let needed = count * depth;
        if bytes.len() - cur.pos < needed {
            return Err(GridError::ParseBytes {
                offset: bytes.len(),
                message: format!("raster truncated: need {needed} bytes, found {}", bytes.len() - cur.pos),
            });
        }
        let raster = &bytes[cur.pos..cur.pos + needed];
        if depth == 1 {
            pixels.extend(raster.iter().map(|&b| b as usize));
        } else {
            pixels.extend(raster.chunks_exact(2).map(|p| ((p[0] as usize) << 8) | p[1] as usize));
        }
    } else {
        for _ in 0..count {
            pixels.push(cur.number("pixel")?);
        }
    }
    if let Some(p) = pixels.iter().position(|&p| p > maxval) {
        return Err(GridError::ParseBytes {
            offset: cur.pos,
            message: format!("pixel {p} exceeds maxval {maxval}"),
        });
    }
    let mut heights = vec![0.0; count];
    for img_row in 0..height {
        let map_row = height - 1 - img_row;
        for col in 0..width {
            heights[map_row * width + col] = pixels[img_row * width + col] as f64 * scale;
        }
    }
    HeightMap::from_heights(width, height, resolution, (0.0, 0.0), heights)
}

pub(crate) fn write_pgm(map: &HeightMap, scale: f64) -> Result<Vec<u8>> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(GridError::Argument(format!("scale must be positive, got {scale}")));
    }
    let mut pixels = Vec::with_capacity(map.len());
    for img_row in 0..map.height() {
        let row = map.height() - 1 - img_row;
        for col in 0..map.width() {
            let cell = &map.cells()[map.index(col, row)];
            let p = if cell.observed { (cell.height / scale).round() } else { 0.0 };
            if !(0.0..=65535.0).contains(&p) {
                return Err(GridError::Argument(format!(
                    "height {} at ({col}, {row}) does not fit a PGM pixel at scale {scale}",
                    cell.height
                )));
            }
            pixels.push(p as u16);
        }
    }
    let maxval = pixels.iter().copied().max().unwrap_or(0).max(1);
    let wide = maxval > 255;
    let maxval = if wide { 65535 } else { 255 };
    let mut out = format!("P5\n{} {}\n{}\n", map.width(), map.height(), maxval).into_bytes();
    for p in pixels {
        if wide {
            out.extend_from_slice(&p.to_be_bytes());
        } else {
            out.push(p as u8);
        }
    }
    Ok(out)
}
