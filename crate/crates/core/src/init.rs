//! Seeded initialization of hypernetwork parameters and latents.
//!
//! The hypernetwork output layer starts with tiny weights and a bias equal
//! to a fresh SIREN initialization, so at step 0 every latent decodes to
//! approximately the same well-scaled sine network.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::hypernet::{HyperNetArch, HyperNetParams};
use crate::layers::Dense;
use crate::math::sqrt;
use crate::siren::MainNetArch;

/// Standard deviation of freshly initialized latents.
pub const LATENT_STD: f64 = 0.01;
/// Output-layer weight bound relative to the SIREN bound of the main layer
/// it feeds, before the `1/√fan_in` factor.
pub const OUTPUT_WEIGHT_SCALE: f64 = 0.1;

const STREAM_HYPER: u64 = 0;
const STREAM_LATENT: u64 = 1;

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn uniform(rng: &mut impl Rng, bound: f64, out: &mut [f64]) {
    if bound == 0.0 {
        out.fill(0.0);
        return;
    }
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    for x in out {
        *x = dist.sample(rng);
    }
}

/// SIREN weight bound of each main layer: `1/fan_in` for the first layer,
/// `√(6/fan_in)/ω0` after it.
pub fn siren_bounds(arch: &MainNetArch) -> Vec<f64> {
    arch.layers()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if i == 0 {
                1.0 / s.fan_in as f64
            } else {
                sqrt(6.0 / s.fan_in as f64) / arch.omega0
            }
        })
        .collect()
}

/// A SIREN-initialized flat weight vector (biases zero).
pub fn siren_weights(arch: &MainNetArch, rng: &mut impl Rng) -> Vec<f64> {
    let mut w = alloc::vec![0.0; arch.param_count()];
    for (slot, bound) in arch.layers().iter().zip(siren_bounds(arch)) {
        uniform(rng, bound, &mut w[slot.weight_offset..slot.bias_offset]);
    }
    w
}

fn kaiming(layer: &Dense, v: &mut [f64], rng: &mut impl Rng) {
    let fan_in = layer.fan_in as f64;
    let (w, b) =
        v[layer.offset..layer.offset + layer.len()].split_at_mut(layer.fan_in * layer.fan_out);
    uniform(rng, sqrt(6.0 / fan_in), w);
    uniform(rng, 1.0 / sqrt(fan_in), b);
}

/// Hypernetwork parameters for `arch`, deterministic in `seed`.
pub fn init_hypernet(arch: &HyperNetArch, seed: u64) -> HyperNetParams {
    let mut rng = rng(seed, STREAM_HYPER);
    let plan = arch.plan();
    let mut v = alloc::vec![0.0; plan.param_count];
    for layer in &plan.trunk {
        kaiming(layer, &mut v, &mut rng);
    }

    let main_slots = arch.main.layers();
    let bounds = siren_bounds(&arch.main);
    let base = siren_weights(&arch.main, &mut rng);
    for head in &plan.heads {
        if let Some(hidden) = &head.hidden {
            kaiming(hidden, &mut v, &mut rng);
        }
        let out = &head.out;
        let scale = OUTPUT_WEIGHT_SCALE / sqrt(out.fan_in as f64);
        let weights = &mut v[out.offset..out.offset + out.fan_in * out.fan_out];
        for (r, row) in weights.chunks_exact_mut(out.fan_in).enumerate() {
            let param = head.range.start + r;
            let layer = main_slots
                .iter()
                .position(|s| s.range().contains(&param))
                .expect("head range inside main layout");
            uniform(&mut rng, scale * bounds[layer], row);
        }
        let bias_start = out.offset + out.fan_in * out.fan_out;
        v[bias_start..bias_start + out.fan_out].copy_from_slice(&base[head.range.clone()]);
    }
    HyperNetParams::new(arch.clone(), v).expect("plan length")
}

/// `count` latents of dimension `dim`, drawn from `N(0, LATENT_STD²)`,
/// row-major. `stream` separates independent draws under one seed.
pub fn init_latents(count: usize, dim: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = rng(seed, STREAM_LATENT + stream);
    let normal = Normal::new(0.0, LATENT_STD).expect("positive std");
    (0..count * dim).map(|_| normal.sample(&mut rng)).collect()
}

/// Hypernetwork parameters plus `count` training latents.
pub fn init_weights(arch: &HyperNetArch, count: usize, seed: u64) -> (HyperNetParams, Vec<f64>) {
    (
        init_hypernet(arch, seed),
        init_latents(count, arch.latent_dim, seed, 0),
    )
}
