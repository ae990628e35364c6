//! Binary (P5) PGM with 8-bit samples.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image::Image;

pub fn encode(image: &Image) -> Vec<u8> {
    let (rows, cols) = image.dims();
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(image.pixels.iter());
    out
}

/// Parses a P5 file; samples are rescaled to 0..=255 when maxval differs.
pub fn decode(bytes: &[u8], id: &str, path: &Path) -> Result<Image> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::format(path, format!("unsupported magic `{}`", fields[0])));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad {what} `{s}`")))
    };
    let cols = num(&fields[1], "width")?;
    let rows = num(&fields[2], "height")?;
    let maxval = num(&fields[3], "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            path,
            format!("only 8-bit PGM supported, maxval {maxval}"),
        ));
    }
    let raster = bytes
        .get(pos..pos + rows * cols)
        .ok_or_else(|| Error::format(path, "truncated PGM raster"))?;
    let data: Vec<u8> = if maxval == 255 {
        raster.to_vec()
    } else {
        raster
            .iter()
            .map(|&v| ((v.min(maxval as u8) as f64) * 255.0 / maxval as f64).round() as u8)
            .collect()
    };
    let pixels = Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(Image::new(id, pixels))
}

pub fn write(path: &Path, image: &Image) -> Result<()> {
    super::write_atomic(path, &encode(image))
}

pub fn read(path: &Path, id: &str) -> Result<Image> {
    decode(&super::read_bytes(path)?, id, path)
}
