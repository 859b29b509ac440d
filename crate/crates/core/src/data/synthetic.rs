//! Labeled synthetic datasets with controllable class separation.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::cloud::PointCloud;
use crate::data::image::{make_grid, ImageDataset};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// One Gaussian blob per image; classes differ by blob position.
    Blobs,
    /// One ring per image; classes differ by radius.
    Rings,
    /// Superquadric surface clouds; classes differ by shape exponents and
    /// proportions.
    Superquadrics,
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(Self::Blobs),
            "rings" => Ok(Self::Rings),
            "superquadrics" => Ok(Self::Superquadrics),
            other => Err(Error::Config(alloc::format!(
                "unknown synthetic kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub classes: usize,
    pub per_class: usize,
    /// Image side for image kinds.
    pub size: usize,
    /// Points per cloud for cloud kinds.
    pub points: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(kind: SyntheticKind, classes: usize, per_class: usize, seed: u64) -> Self {
        Self {
            kind,
            classes,
            per_class,
            size: 28,
            points: 2000,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Synthetic {
    Images(ImageDataset),
    Clouds {
        clouds: Vec<PointCloud>,
        labels: Vec<u32>,
    },
}

/// Samples are ordered class by class. Sample `i` of class `k` draws from
/// its own random stream, so changing `per_class` keeps earlier samples.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    if spec.classes == 0 {
        return Err(Error::Config(
            "synthetic data needs at least one class".into(),
        ));
    }
    let mut labels = Vec::with_capacity(spec.classes * spec.per_class);
    for k in 0..spec.classes {
        labels.extend(core::iter::repeat_n(k as u32, spec.per_class));
    }
    let rng_for = |k: usize, i: usize| {
        let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
        r.set_stream(((k as u64) << 32) | i as u64);
        r
    };
    match spec.kind {
        SyntheticKind::Blobs | SyntheticKind::Rings => {
            if spec.size == 0 {
                return Err(Error::Config(
                    "synthetic image size must be positive".into(),
                ));
            }
            let grid = make_grid(spec.size, spec.size);
            let mut images = Vec::with_capacity(labels.len() * spec.size * spec.size);
            for k in 0..spec.classes {
                for i in 0..spec.per_class {
                    let mut rng = rng_for(k, i);
                    match spec.kind {
                        SyntheticKind::Blobs => blob(&grid, k, spec.classes, &mut rng, &mut images),
                        _ => ring(&grid, k, spec.classes, &mut rng, &mut images),
                    }
                }
            }
            Ok(Synthetic::Images(ImageDataset::new(
                images, labels, spec.size, spec.size,
            )?))
        }
        SyntheticKind::Superquadrics => {
            if spec.points == 0 {
                return Err(Error::Config("synthetic clouds need points".into()));
            }
            let mut clouds = Vec::with_capacity(labels.len());
            for k in 0..spec.classes {
                for i in 0..spec.per_class {
                    let mut rng = rng_for(k, i);
                    clouds.push(superquadric(k, spec.classes, spec.points, &mut rng)?);
                }
            }
            Ok(Synthetic::Clouds { clouds, labels })
        }
    }
}

fn jitter(rng: &mut impl Rng, amount: f64) -> f64 {
    rng.random_range(-amount..=amount)
}

fn blob(grid: &[f64], k: usize, classes: usize, rng: &mut impl Rng, out: &mut Vec<f64>) {
    let angle = 2.0 * PI * k as f64 / classes as f64;
    let radius = if classes == 1 { 0.0 } else { 0.45 };
    let cx = radius * math::cos(angle) + jitter(rng, 0.06);
    let cy = radius * math::sin(angle) + jitter(rng, 0.06);
    let sigma = 0.2 * (1.0 + jitter(rng, 0.1));
    let amp = 0.9 + jitter(rng, 0.1);
    for p in grid.chunks_exact(2) {
        let r2 = (p[0] - cx) * (p[0] - cx) + (p[1] - cy) * (p[1] - cy);
        out.push((amp * math::exp(-r2 / (2.0 * sigma * sigma))).clamp(0.0, 1.0));
    }
}

fn ring(grid: &[f64], k: usize, classes: usize, rng: &mut impl Rng, out: &mut Vec<f64>) {
    let base = if classes == 1 {
        0.5
    } else {
        0.25 + 0.5 * k as f64 / (classes - 1) as f64
    };
    let r0 = base + jitter(rng, 0.03);
    let (cx, cy) = (jitter(rng, 0.05), jitter(rng, 0.05));
    let width = 0.08 * (1.0 + jitter(rng, 0.1));
    let amp = 0.9 + jitter(rng, 0.1);
    for p in grid.chunks_exact(2) {
        let r = math::sqrt((p[0] - cx) * (p[0] - cx) + (p[1] - cy) * (p[1] - cy));
        out.push((amp * math::exp(-(r - r0) * (r - r0) / (2.0 * width * width))).clamp(0.0, 1.0));
    }
}

fn signed_pow(x: f64, e: f64) -> f64 {
    let m = libm::pow(x.abs(), e);
    if x < 0.0 {
        -m
    } else {
        m
    }
}

fn superquadric(k: usize, classes: usize, points: usize, rng: &mut impl Rng) -> Result<PointCloud> {
    let t = if classes == 1 {
        0.5
    } else {
        k as f64 / (classes - 1) as f64
    };
    // From spiky (small exponents) to boxy-rounded (large), with the
    // proportions drifting from flat to elongated.
    let e1 = 0.3 + 1.7 * t + jitter(rng, 0.05);
    let e2 = 1.8 - 1.4 * t + jitter(rng, 0.05);
    let scale = [
        1.0 + jitter(rng, 0.1),
        0.5 + 0.5 * t + jitter(rng, 0.05),
        1.0 - 0.6 * t + jitter(rng, 0.05),
    ];
    let mut raw = Vec::with_capacity(points);
    for _ in 0..points {
        let eta: f64 = rng.random_range(-PI / 2.0..=PI / 2.0);
        let omega: f64 = rng.random_range(-PI..PI);
        let (ce, se) = (math::cos(eta), math::sin(eta));
        let (co, so) = (math::cos(omega), math::sin(omega));
        raw.push([
            scale[0] * signed_pow(ce, e1) * signed_pow(co, e2),
            scale[1] * signed_pow(ce, e1) * signed_pow(so, e2),
            scale[2] * signed_pow(se, e1),
        ]);
    }
    PointCloud::fit(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_empty_cases() {
        let spec = SyntheticSpec::new(SyntheticKind::Rings, 2, 3, 4);
        assert_eq!(gen_synthetic(&spec).unwrap(), gen_synthetic(&spec).unwrap());
        let empty = SyntheticSpec::new(SyntheticKind::Blobs, 3, 0, 1);
        match gen_synthetic(&empty).unwrap() {
            Synthetic::Images(ds) => assert!(ds.is_empty()),
            _ => panic!("expected images"),
        }
        assert!("cubes".parse::<SyntheticKind>().is_err());
    }

    #[test]
    fn clouds_fit_the_cube() {
        let mut spec = SyntheticSpec::new(SyntheticKind::Superquadrics, 2, 1, 0);
        spec.points = 300;
        let Synthetic::Clouds { clouds, labels } = gen_synthetic(&spec).unwrap() else {
            panic!("expected clouds");
        };
        assert_eq!(labels, [0, 1]);
        for c in &clouds {
            assert_eq!(c.len(), 300);
            assert!(c.points().iter().flatten().all(|x| x.abs() <= 0.9));
        }
    }
}
