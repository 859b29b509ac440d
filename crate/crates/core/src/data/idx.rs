//! IDX tensors (big-endian header, unsigned-byte payload).

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;
const UBYTE: u8 = 0x08;

/// A parsed unsigned-byte IDX tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn format(offset: usize, reason: &str) -> Error {
    Error::Format {
        offset,
        reason: reason.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format(bytes.len(), "truncated header"))
}

/// Parses any unsigned-byte IDX tensor. Never panics.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray> {
    let magic = read_u32(bytes, 0)?;
    if magic >> 16 != 0 {
        return Err(format(0, "magic must start with two zero bytes"));
    }
    if bytes[2] != UBYTE {
        return Err(format(2, "only unsigned-byte tensors are supported"));
    }
    let ndim = bytes[3] as usize;
    if ndim == 0 {
        return Err(format(3, "tensor has no dimensions"));
    }
    let mut dims = Vec::with_capacity(ndim);
    let mut total: usize = 1;
    for k in 0..ndim {
        let offset = 4 + 4 * k;
        let dim = read_u32(bytes, offset)? as usize;
        total = total
            .checked_mul(dim)
            .ok_or_else(|| format(offset, "dimension product overflows"))?;
        dims.push(dim);
    }
    let start = 4 + 4 * ndim;
    let end = start
        .checked_add(total)
        .ok_or_else(|| format(start, "dimension product overflows"))?;
    if bytes.len() < end {
        return Err(format(bytes.len(), "truncated payload"));
    }
    if bytes.len() > end {
        return Err(format(end, "trailing bytes after payload"));
    }
    Ok(IdxArray {
        dims,
        data: bytes[start..end].to_vec(),
    })
}

/// Images scaled to `[0, 1]`: `(pixels t × h × w, t, h, w)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<f64>, usize, usize, usize)> {
    if read_u32(bytes, 0)? != IMAGES_MAGIC {
        return Err(format(0, "expected image magic 0x00000803"));
    }
    let arr = parse_idx(bytes)?;
    let pixels = arr.data.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((pixels, arr.dims[0], arr.dims[1], arr.dims[2]))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u32>> {
    if read_u32(bytes, 0)? != LABELS_MAGIC {
        return Err(format(0, "expected label magic 0x00000801"));
    }
    Ok(parse_idx(bytes)?.data.into_iter().map(u32::from).collect())
}

/// Serializes an unsigned-byte tensor.
pub fn encode_idx(dims: &[usize], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + data.len());
    out.extend_from_slice(&[0, 0, UBYTE, dims.len() as u8]);
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_white_pixel() {
        let bytes = [0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 255];
        let (px, t, h, w) = parse_idx_images(&bytes).unwrap();
        assert_eq!((t, h, w), (1, 1, 1));
        assert_eq!(px, [1.0]);
    }

    #[test]
    fn label_round_trip() {
        let bytes = encode_idx(&[3], &[0, 1, 2]);
        assert_eq!(&bytes[..4], &[0, 0, 8, 1]);
        assert_eq!(parse_idx_labels(&bytes).unwrap(), [0, 1, 2]);
    }

    #[test]
    fn structured_failures() {
        assert!(matches!(
            parse_idx(&[]),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            parse_idx(&[0, 0, 8, 1, 0, 0, 0, 5, 1]),
            Err(Error::Format { offset: 9, .. })
        ));
        assert!(matches!(
            parse_idx(&[1, 0, 8, 1]),
            Err(Error::Format { offset: 0, .. })
        ));
        let huge = [
            0, 0, 8, 3, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255,
        ];
        assert!(matches!(parse_idx(&huge), Err(Error::Format { .. })));
        assert!(parse_idx_images(&encode_idx(&[2], &[1, 2])).is_err());
    }
}
