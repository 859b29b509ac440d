//! Scalar math routed through `libm` so results do not depend on the
//! platform libm, plus a vectorizable sine/cosine kernel for activations.

// The NaN-aware negated comparisons and full-width coefficients are deliberate.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn powi(x: f64, n: i32) -> f64 {
    libm::pow(x, n as f64)
}

pub fn norm2(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Dot product with eight interleaved partial sums, so it vectorizes while
/// staying independent of the instruction set.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

// Cody-Waite split of pi/2; the first two parts carry 33 significant bits so
// `q * part` is exact for |q| < 2^20.
const TWO_OVER_PI: f64 = core::f64::consts::FRAC_2_PI;
const PIO2_1: f64 = 1.570_796_326_734_125_614_17e0;
const PIO2_2: f64 = 6.077_100_506_303_965_976_60e-11;
const PIO2_3: f64 = 2.022_266_248_711_166_455_80e-21;
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;
// Beyond this the reduction above loses exactness; such inputs go to libm.
const REDUCE_LIMIT: f64 = 8.0e5;

const S1: f64 = -1.666_666_666_666_663_243_48e-1;
const S2: f64 = 8.333_333_333_322_489_461_24e-3;
const S3: f64 = -1.984_126_982_985_794_931_34e-4;
const S4: f64 = 2.755_731_370_707_006_767_89e-6;
const S5: f64 = -2.505_076_025_340_686_341_95e-8;
const S6: f64 = 1.589_690_995_211_550_102_21e-10;

const C1: f64 = 4.166_666_666_666_660_190_37e-2;
const C2: f64 = -1.388_888_888_887_410_957_49e-3;
const C3: f64 = 2.480_158_728_947_672_941_78e-5;
const C4: f64 = -2.755_731_435_139_066_330_35e-7;
const C5: f64 = 2.087_572_321_298_174_827_90e-9;
const C6: f64 = -1.135_964_755_778_819_482_65e-11;

#[inline(always)]
fn sin_cos_one(x: f64) -> (f64, f64) {
    let shifted = x * TWO_OVER_PI + ROUND_MAGIC;
    let quadrant = shifted.to_bits();
    let q = shifted - ROUND_MAGIC;
    let r = ((x - q * PIO2_1) - q * PIO2_2) - q * PIO2_3;

    let z = r * r;
    let v = z * r;
    let ps = S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)));
    let s = r + v * (S1 + z * ps);

    let pc = z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    let c = w + (((1.0 - w) - hz) + z * pc);

    let swap = 0u64.wrapping_sub(quadrant & 1);
    let (sb, cb) = (s.to_bits(), c.to_bits());
    let sin_bits = ((sb & !swap) | (cb & swap)) ^ ((quadrant & 2) << 62);
    let cos_bits = ((cb & !swap) | (sb & swap)) ^ ((quadrant.wrapping_add(1) & 2) << 62);
    (f64::from_bits(sin_bits), f64::from_bits(cos_bits))
}

const LANES: usize = 8;

#[inline(always)]
fn sin_cos_scaled_body(u: &[f64], scale: f64, sin_out: &mut [f64], cos_out: &mut [f64]) {
    let n = u.len() / LANES * LANES;
    for ((ub, sb), cb) in u[..n]
        .chunks_exact(LANES)
        .zip(sin_out[..n].chunks_exact_mut(LANES))
        .zip(cos_out[..n].chunks_exact_mut(LANES))
    {
        let mut s = [0.0; LANES];
        let mut c = [0.0; LANES];
        for k in 0..LANES {
            (s[k], c[k]) = sin_cos_one(scale * ub[k]);
        }
        sb.copy_from_slice(&s);
        cb.copy_from_slice(&c);
    }
    for i in n..u.len() {
        (sin_out[i], cos_out[i]) = sin_cos_one(scale * u[i]);
    }
}

#[cfg(all(feature = "std", target_arch = "x86_64"))]
#[target_feature(enable = "avx512f")]
unsafe fn sin_cos_scaled_avx512(u: &[f64], scale: f64, s: &mut [f64], c: &mut [f64]) {
    sin_cos_scaled_body(u, scale, s, c)
}

#[cfg(all(feature = "std", target_arch = "x86_64"))]
#[target_feature(enable = "avx2")]
unsafe fn sin_cos_scaled_avx2(u: &[f64], scale: f64, s: &mut [f64], c: &mut [f64]) {
    sin_cos_scaled_body(u, scale, s, c)
}

/// Writes `sin(scale * u[i])` and `cos(scale * u[i])` for every element.
///
/// Accurate to about one ulp. The SIMD paths run exactly the same scalar
/// operations (no fused multiply-add), so output is bit-identical to the
/// portable path.
pub fn sin_cos_scaled(u: &[f64], scale: f64, sin_out: &mut [f64], cos_out: &mut [f64]) {
    assert!(sin_out.len() == u.len() && cos_out.len() == u.len());

    #[cfg(all(feature = "std", target_arch = "x86_64"))]
    {
        if std::is_x86_feature_detected!("avx512f") {
            // SAFETY: the required target feature was detected at runtime.
            unsafe { sin_cos_scaled_avx512(u, scale, sin_out, cos_out) };
        } else if std::is_x86_feature_detected!("avx2") {
            // SAFETY: as above.
            unsafe { sin_cos_scaled_avx2(u, scale, sin_out, cos_out) };
        } else {
            sin_cos_scaled_body(u, scale, sin_out, cos_out);
        }
    }
    #[cfg(not(all(feature = "std", target_arch = "x86_64")))]
    sin_cos_scaled_body(u, scale, sin_out, cos_out);

    if u.iter().any(|&x| !((scale * x).abs() <= REDUCE_LIMIT)) {
        for ((&ui, s), c) in u.iter().zip(sin_out.iter_mut()).zip(cos_out.iter_mut()) {
            let x = scale * ui;
            if !(x.abs() <= REDUCE_LIMIT) {
                *s = sin(x);
                *c = cos(x);
            }
        }
    }
}
