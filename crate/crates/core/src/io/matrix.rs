//! `PRNUMAT1`: 8-byte magic, rows and cols as little-endian u32, then
//! row-major little-endian f64 entries.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PRNUMAT1";
pub const HEADER_LEN: usize = 16;

pub fn encode(m: &Array2<f64>) -> Result<Vec<u8>> {
    let (rows, cols) = m.dim();
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::param(format!("matrix side {v} exceeds u32")));
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&to_u32(rows)?.to_le_bytes());
    out.extend_from_slice(&to_u32(cols)?.to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Array2<f64>> {
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(Error::format(path, "missing PRNUMAT1 header"));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != rows * cols * 8 {
        return Err(Error::format(
            path,
            format!(
                "expected {} payload bytes for {rows}x{cols}, found {}",
                rows * cols * 8,
                body.len()
            ),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write(path: &Path, m: &Array2<f64>) -> Result<()> {
    super::write_atomic(path, &encode(m)?)
}

pub fn read(path: &Path) -> Result<Array2<f64>> {
    decode(&super::read_bytes(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let m = ndarray::arr2(&[[1.5, -2.0, 0.25]]);
        let bytes = encode(&m).unwrap();
        assert_eq!(&bytes[..8], b"PRNUMAT1");
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&bytes[16..24], &1.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 24);
        assert_eq!(decode(&bytes, Path::new("m")).unwrap(), m);
    }

    #[test]
    fn rejects_corrupt_files() {
        let m = ndarray::arr2(&[[1.0, 2.0]]);
        let bytes = encode(&m).unwrap();
        assert!(decode(&bytes[..20], Path::new("m")).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad, Path::new("m")).is_err());
    }
}
