//! `HUDF` cached distance-sample datasets.

use hyperinr_core::model::Coords;
use hyperinr_core::{FieldDataset, Result};

use crate::container::{Reader, Writer};

pub const MAGIC: &[u8; 4] = b"HUDF";
pub const VERSION: u16 = 1;

/// `key` identifies the inputs the samples were drawn from.
pub fn encode(key: &[u8; 32], ds: &FieldDataset) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.bytes(key);
    w.len_u32(ds.input_dim());
    w.len_u32(ds.output_dim());
    w.len_u32(ds.points());
    match ds.coords() {
        Coords::Shared(c) => {
            w.u32(0);
            w.f64s(c);
        }
        Coords::PerSample(c) => {
            w.u32(1);
            w.f64s(c);
        }
    }
    w.f64s(ds.targets());
    w.u32s(ds.labels());
    w.finish()
}

pub fn decode(bytes: &[u8]) -> Result<([u8; 32], FieldDataset)> {
    let mut r = Reader::open(bytes, MAGIC, VERSION)?;
    let key = r.array::<32>()?;
    let p = r.usize()?;
    let c = r.usize()?;
    let n = r.usize()?;
    let tag_at = r.offset();
    let tag = r.u32()?;
    let raw = r.f64s()?;
    let coords = match tag {
        0 => Coords::Shared(raw),
        1 => Coords::PerSample(raw),
        t => {
            return Err(hyperinr_core::Error::Format {
                offset: tag_at,
                reason: format!("unknown coordinate layout {t}"),
            })
        }
    };
    let targets = r.f64s()?;
    let labels = r.u32s()?;
    let ds = match FieldDataset::with_points(p, c, n, coords, targets, labels) {
        Ok(ds) => ds,
        Err(e) => return r.invalid(e),
    };
    r.end()?;
    Ok((key, ds))
}
