//! Straight-line paths between latents.

use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::hypernet::HyperNetParams;
use crate::model::ModelBundle;
use crate::siren::GridTape;

/// `steps` evenly spaced values from 0 to 1 inclusive.
pub fn interpolation_alphas(steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::Config(
            "interpolation needs at least two steps".into(),
        ));
    }
    Ok((0..steps).map(|s| s as f64 / (steps - 1) as f64).collect())
}

/// One point of an interpolation path and its decoded values on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    pub alpha: f64,
    pub latent: Vec<f64>,
    /// `n × c` network outputs.
    pub values: Vec<f64>,
}

/// `z(α) = (1 − α) z_a + α z_b`, decoded over `coords`. The endpoints are
/// `z_a` and `z_b` themselves.
pub fn interpolate_latents(
    bundle: &ModelBundle,
    id_a: usize,
    id_b: usize,
    steps: usize,
    coords: &[f64],
) -> Result<Vec<Interpolant>> {
    let za = bundle.latent(id_a)?;
    let zb = bundle.latent(id_b)?;
    let alphas = interpolation_alphas(steps)?;
    let mut out = Vec::with_capacity(steps);
    for (s, &alpha) in alphas.iter().enumerate() {
        let latent: Vec<f64> = if s == 0 {
            za.to_vec()
        } else if s == steps - 1 {
            zb.to_vec()
        } else {
            za.iter()
                .zip(zb)
                .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
                .collect()
        };
        let values = decode(&bundle.hyper, &latent, coords)?;
        out.push(Interpolant {
            alpha,
            latent,
            values,
        });
    }
    Ok(out)
}

/// `f(φ(v, z), p)` over the `n × p` coordinates.
pub fn decode(hyper: &HyperNetParams, z: &[f64], coords: &[f64]) -> Result<Vec<f64>> {
    check_len("latent", hyper.arch().latent_dim, z.len())?;
    let w = hyper.forward(z)?;
    let mut tape = GridTape::new();
    Ok(tape.forward(w.arch(), w.as_slice(), coords)?.to_vec())
}
