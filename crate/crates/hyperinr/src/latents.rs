//! `HLAT` files: inferred latents for one split.

use hyperinr_core::{Matrix, Result};

use crate::container::{Reader, Writer};
use crate::dataset::Split;

pub const MAGIC: &[u8; 4] = b"HLAT";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentFile {
    pub fingerprint: [u8; 32],
    /// Seed of the bundle the latents were inferred against.
    pub bundle_seed: u64,
    pub split: Split,
    pub latents: Matrix,
    pub labels: Vec<u32>,
}

pub fn encode(f: &LatentFile) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.bytes(&f.fingerprint);
    w.u64(f.bundle_seed);
    w.u32(match f.split {
        Split::Train => 0,
        Split::Test => 1,
    });
    w.len_u32(f.latents.cols());
    w.f64s(f.latents.as_slice());
    w.u32s(&f.labels);
    w.finish()
}

pub fn decode(bytes: &[u8]) -> Result<LatentFile> {
    let mut r = Reader::open(bytes, MAGIC, VERSION)?;
    let fingerprint = r.array::<32>()?;
    let bundle_seed = r.u64()?;
    let tag_at = r.offset();
    let split = match r.u32()? {
        0 => Split::Train,
        1 => Split::Test,
        t => {
            return Err(hyperinr_core::Error::Format {
                offset: tag_at,
                reason: format!("unknown split tag {t}"),
            })
        }
    };
    let cols = r.usize()?;
    let z = r.f64s()?;
    let labels = r.u32s()?;
    let rows = z.len().checked_div(cols).unwrap_or(0);
    let latents = match Matrix::from_vec(rows, cols, z) {
        Ok(m) if labels.is_empty() || labels.len() == rows => m,
        Ok(_) => {
            return r.invalid(hyperinr_core::Error::Shape {
                what: "latent labels",
                expected: rows,
                got: labels.len(),
            })
        }
        Err(e) => return r.invalid(e),
    };
    r.end()?;
    Ok(LatentFile {
        fingerprint,
        bundle_seed,
        split,
        latents,
        labels,
    })
}
