//! `HINR` model bundle files.

use hyperinr_core::{
    BundleMeta, Error, HyperNetArch, HyperNetParams, MainNetArch, Matrix, ModelBundle, Result,
};

use crate::container::{Reader, Writer};

pub const MAGIC: &[u8; 4] = b"HINR";
pub const VERSION: u16 = 1;

pub(crate) fn write_arch(w: &mut Writer, arch: &HyperNetArch) {
    let m = &arch.main;
    w.len_u32(m.input_dim);
    w.len_u32(m.output_dim);
    w.f64(m.omega0);
    w.dims(&m.hidden);
    w.len_u32(arch.latent_dim);
    w.len_u32(arch.heads);
    w.dims(&arch.trunk);
}

pub(crate) fn read_arch(r: &mut Reader<'_>) -> Result<HyperNetArch> {
    let input = r.usize()?;
    let output = r.usize()?;
    let omega0 = r.f64()?;
    let hidden = r.dims()?;
    let latent = r.usize()?;
    let heads = r.usize()?;
    let trunk = r.dims()?;
    let arch = MainNetArch::new(input, hidden, output, omega0)
        .and_then(|main| HyperNetArch::new(latent, trunk, heads, main));
    match arch {
        Ok(a) => Ok(a),
        Err(e) => r.invalid(e),
    }
}

pub fn encode(b: &ModelBundle) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.bytes(&b.meta.fingerprint);
    w.u64(b.meta.seed);
    write_arch(&mut w, b.arch());
    w.f64s(b.hyper.as_slice());
    w.u64(b.latents.rows() as u64);
    w.f64s(b.latents.as_slice());
    w.u32s(&b.labels);
    w.finish()
}

pub fn decode(bytes: &[u8]) -> Result<ModelBundle> {
    let mut r = Reader::open(bytes, MAGIC, VERSION)?;
    let fingerprint = r.array::<32>()?;
    let seed = r.u64()?;
    let arch = read_arch(&mut r)?;
    let l = arch.latent_dim;
    let v = r.f64s()?;
    let hyper = match HyperNetParams::new(arch, v) {
        Ok(h) => h,
        Err(e) => return r.invalid(e),
    };
    let rows = r.u64()?;
    let z = r.f64s()?;
    if rows.checked_mul(l as u64) != Some(z.len() as u64) {
        return r.invalid(Error::Shape {
            what: "bundle latents",
            expected: (rows as usize).saturating_mul(l),
            got: z.len(),
        });
    }
    let labels = r.u32s()?;
    let at_end = r.offset();
    r.end()?;
    let bundle = Matrix::from_vec(rows as usize, l, z).and_then(|latents| {
        ModelBundle::new(hyper, latents, labels, BundleMeta { fingerprint, seed })
    });
    bundle.map_err(|e| Error::Format {
        offset: at_end,
        reason: e.to_string(),
    })
}
