//! PGM and CSV helpers for map export.

use crate::geometry::{Cell, GridGeometry};
use std::fmt::Write as _;

/// A decoded grayscale image; `pixels` is row-major with the top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub max_value: u32,
    pub pixels: Vec<u16>,
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn parse_num(tok: Option<&[u8]>, what: &str) -> Result<usize, String> {
    let tok = tok.ok_or_else(|| format!("missing {what}"))?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("bad {what}"))
}

pub fn read_pgm(bytes: &[u8]) -> Result<PgmImage, String> {
    let mut pos = 0;
    let magic = next_token(bytes, &mut pos).ok_or("missing magic")?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        _ => return Err("not a P2/P5 pgm".into()),
    };
    let width = parse_num(next_token(bytes, &mut pos), "width")?;
    let height = parse_num(next_token(bytes, &mut pos), "height")?;
    let max_value = parse_num(next_token(bytes, &mut pos), "maxval")? as u32;
    if width == 0 || height == 0 || max_value == 0 || max_value > 65535 {
        return Err("invalid pgm header".into());
    }
    let n = width * height;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        pos += 1; // single whitespace after maxval
        let wide = max_value > 255;
        let need = if wide { 2 * n } else { n };
        let data = bytes.get(pos..pos + need).ok_or("truncated pgm data")?;
        if wide {
            pixels.extend(data.chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])));
        } else {
            pixels.extend(data.iter().map(|&b| b as u16));
        }
    } else {
        for _ in 0..n {
            pixels.push(parse_num(next_token(bytes, &mut pos), "pixel")? as u16);
        }
    }
    Ok(PgmImage {
        width,
        height,
        max_value,
        pixels,
    })
}

/// Encodes a grid as binary PGM (P5), top row first. `value` maps a cell to 0–255.
pub fn grid_to_pgm(geometry: &GridGeometry, mut value: impl FnMut(Cell) -> u8) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", geometry.width, geometry.height).into_bytes();
    for row in (0..geometry.height).rev() {
        for col in 0..geometry.width {
            out.push(value(Cell::new(row, col)));
        }
    }
    out
}

/// Scales a [0, 1] value to a gray level.
pub fn unit_to_gray(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// `row,col,x,y,<columns...>` CSV with one line per cell.
pub fn grid_to_csv(
    geometry: &GridGeometry,
    headers: &[&str],
    mut values: impl FnMut(Cell) -> Vec<f64>,
) -> String {
    let mut s = String::from("row,col,x,y");
    for h in headers {
        s.push(',');
        s.push_str(h);
    }
    s.push('\n');
    for cell in geometry.cells() {
        let c = geometry.center(cell);
        let _ = write!(s, "{},{},{:.4},{:.4}", cell.row, cell.col, c.x, c.y);
        for v in values(cell) {
            let _ = write!(s, ",{v:.6}");
        }
        s.push('\n');
    }
    s
}
