//! 8-bit PGM/PNG export (values x255, rounded) and lossless CSV grids.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::scalar::Scalar;

/// Quantizes `[0,1]` intensities to bytes.
pub fn to_bytes<T: Scalar>(data: &[T]) -> Vec<u8> {
    data.iter()
        .map(|v| (v.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect()
}

pub fn encode_pgm<T: Scalar>(height: usize, width: usize, data: &[T]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(to_bytes(data));
    out
}

pub fn encode_png<T: Scalar>(height: usize, width: usize, data: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(Cursor::new(&mut buf), width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Format(e.to_string()))?;
        writer
            .write_image_data(&to_bytes(data))
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(buf)
}

pub fn write_pgm<T: Scalar>(path: &Path, height: usize, width: usize, data: &[T]) -> Result<()> {
    write_atomic(path, &encode_pgm(height, width, data))
}

pub fn write_png<T: Scalar>(path: &Path, height: usize, width: usize, data: &[T]) -> Result<()> {
    write_atomic(path, &encode_png(height, width, data)?)
}

/// One CSV row per image row, values printed in shortest round-trip form.
pub fn encode_csv_grid<T: Scalar>(height: usize, width: usize, data: &[T]) -> String {
    let mut s = String::new();
    for y in 0..height {
        let row: Vec<String> = data[y * width..(y + 1) * width]
            .iter()
            .map(|v| format!("{}", v.as_f64()))
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv_grid<T: Scalar>(path: &Path, height: usize, width: usize, data: &[T]) -> Result<()> {
    write_atomic(path, encode_csv_grid(height, width, data).as_bytes())
}

/// Parses a grid written by [`encode_csv_grid`]; returns `(height, width, data)`.
pub fn decode_csv_grid(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut data = Vec::new();
    let mut width = None;
    let mut height = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad value `{t}`: {e}"))))
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Format(format!("ragged grid: row {height} has {} values", row.len())))
            }
            _ => {}
        }
        data.extend(row);
        height += 1;
    }
    Ok((height, width.unwrap_or(0), data))
}
