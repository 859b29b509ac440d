#![allow(dead_code)]

use hyperinr_core::init;
use hyperinr_core::{HyperNetArch, HyperNetParams, MainNetArch};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    init::rng(seed, 0x7e57)
}

/// `‖a − b‖∞ / ‖b‖∞`, falling back to absolute error for a vanishing oracle.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// A small random main network: 1-3 inputs, one or two hidden layers of
/// width 1-6, 1-2 outputs.
pub fn small_main(rng: &mut impl Rng) -> MainNetArch {
    let layers = rng.random_range(1..=2);
    let hidden = (0..layers).map(|_| rng.random_range(1..=6)).collect();
    let omega = [1.0, 5.0, 30.0][rng.random_range(0..3)];
    MainNetArch::new(
        rng.random_range(1..=3),
        hidden,
        rng.random_range(1..=2),
        omega,
    )
    .unwrap()
}

pub fn small_hyper(rng: &mut impl Rng) -> HyperNetArch {
    let main = small_main(rng);
    let trunk = (0..rng.random_range(0..=2))
        .map(|_| rng.random_range(1..=5))
        .collect();
    let heads = [0, 0, 2, 3][rng.random_range(0..4)];
    HyperNetArch::new(rng.random_range(1..=4), trunk, heads, main).unwrap()
}

/// Hypernetwork parameters scaled so the generated weights sit in the
/// SIREN regime but stay well away from zero.
pub fn random_hyper(arch: &HyperNetArch, rng: &mut impl Rng) -> HyperNetParams {
    let k = arch.param_count();
    HyperNetParams::new(arch.clone(), uniform_vec(rng, k, -0.5, 0.5)).unwrap()
}

pub fn grid(h: usize, w: usize) -> Vec<f64> {
    hyperinr_core::data::make_grid(h, w)
}
