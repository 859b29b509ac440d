//! Analytic derivatives against central finite differences.

mod common;

use common::*;
use hyperinr_core::diagnostics::{latent_gradient, latent_jacobian, latent_jacobian_via};
use hyperinr_core::siren::{GridTape, PointTape};
use hyperinr_core::train::recon_loss;
use hyperinr_core::{init, MainNetArch, MainNetWeights, SampleBatch};
use proptest::prelude::*;

const H: f64 = 1e-6;
const TOL: f64 = 1e-5;

fn weighted_output(arch: &MainNetArch, w: &[f64], coords: &[f64], u: &[f64]) -> f64 {
    let mut tape = GridTape::new();
    let out = tape.forward(arch, w, coords).unwrap();
    out.iter().zip(u).map(|(a, b)| a * b).sum()
}

fn central<F: FnMut(&[f64]) -> f64>(x: &[f64], mut f: F) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|k| {
            xp[k] = x[k] + H;
            let up = f(&xp);
            xp[k] = x[k] - H;
            let down = f(&xp);
            xp[k] = x[k];
            (up - down) / (2.0 * H)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn main_network_weight_gradient(seed in any::<u64>(), n in 1usize..6) {
        let mut r = rng(seed);
        let arch = small_main(&mut r);
        let mut w = init::siren_weights(&arch, &mut r);
        for x in w.iter_mut() {
            *x += rand::Rng::random_range(&mut r, -0.05..0.05);
        }
        let coords = uniform_vec(&mut r, n * arch.input_dim, -1.0, 1.0);
        let u = uniform_vec(&mut r, n * arch.output_dim, -1.0, 1.0);

        let mut tape = GridTape::new();
        tape.forward(&arch, &w, &coords).unwrap();
        let mut g = vec![0.0; w.len()];
        tape.backward(&arch, &w, &u, &mut g).unwrap();
        let fd = central(&w, |wp| weighted_output(&arch, wp, &coords, &u));
        prop_assert!(rel_err(&g, &fd) < TOL, "rel err {}", rel_err(&g, &fd));

        // The single-point tape agrees with the batched one.
        let mut single = vec![0.0; w.len()];
        let weights = MainNetWeights::new(arch.clone(), w.clone()).unwrap();
        let mut pt = PointTape::default();
        let (p, c) = (arch.input_dim, arch.output_dim);
        for i in 0..n {
            pt.forward(&weights, &coords[i * p..(i + 1) * p]).unwrap();
            let gi = pt.backward(&weights, &u[i * c..(i + 1) * c]).unwrap();
            for (s, x) in single.iter_mut().zip(&gi.weights) {
                *s += x;
            }
        }
        prop_assert!(rel_err(&single, &g) < 1e-12);
    }

    #[test]
    fn hypernetwork_gradients(seed in any::<u64>()) {
        let mut r = rng(seed);
        let arch = small_hyper(&mut r);
        let v = random_hyper(&arch, &mut r);
        let z = uniform_vec(&mut r, arch.latent_dim, -1.0, 1.0);
        let u = uniform_vec(&mut r, arch.output_dim(), -1.0, 1.0);
        let dot = |w: &[f64]| w.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();

        let (gv, gz) = v.backward(&z, &u).unwrap();
        let fd_z = central(&z, |zp| dot(v.forward(zp).unwrap().as_slice()));
        prop_assert!(rel_err(&gz, &fd_z) < TOL, "z rel err {}", rel_err(&gz, &fd_z));
        let fd_v = central(v.as_slice(), |vp| {
            let p = hyperinr_core::HyperNetParams::new(arch.clone(), vp.to_vec()).unwrap();
            dot(p.forward(&z).unwrap().as_slice())
        });
        prop_assert!(rel_err(&gv, &fd_v) < TOL, "v rel err {}", rel_err(&gv, &fd_v));
    }

    #[test]
    fn hypernetwork_jacobian_columns(seed in any::<u64>()) {
        let mut r = rng(seed);
        let arch = small_hyper(&mut r);
        let v = random_hyper(&arch, &mut r);
        let z = uniform_vec(&mut r, arch.latent_dim, -1.0, 1.0);
        let jac = v.jacobian_z(&z).unwrap();
        let mut zp = z.clone();
        for k in 0..z.len() {
            zp[k] = z[k] + H;
            let up = v.forward(&zp).unwrap().into_vec();
            zp[k] = z[k] - H;
            let down = v.forward(&zp).unwrap().into_vec();
            zp[k] = z[k];
            let fd: Vec<f64> = up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * H)).collect();
            prop_assert!(rel_err(&jac.column(k), &fd) < 1e-6);
        }
    }

    #[test]
    fn latent_gradient_and_jacobian(seed in any::<u64>(), n in 1usize..8) {
        let mut r = rng(seed);
        let arch = small_hyper(&mut r);
        let v = random_hyper(&arch, &mut r);
        let z = uniform_vec(&mut r, arch.latent_dim, -1.0, 1.0);
        let coords = uniform_vec(&mut r, n * arch.main.input_dim, -1.0, 1.0);
        let targets = uniform_vec(&mut r, n * arch.main.output_dim, 0.0, 1.0);
        let batch = SampleBatch::new(&coords, &targets, arch.main.input_dim, arch.main.output_dim).unwrap();

        let g = latent_gradient(&v, &z, &batch, 0).unwrap();
        let fd = central(&z, |zp| recon_loss(&v, zp, &batch).unwrap().loss);
        prop_assert!(rel_err(&g.g, &fd) < TOL, "rel err {}", rel_err(&g.g, &fd));
        let norm = g.g.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((g.norm - norm).abs() <= 1e-15 * norm.max(1.0));

        // Forward-mode stacked Jacobian against per-point reverse sweeps.
        let j = latent_jacobian(&v, &z, &batch).unwrap();
        let via = latent_jacobian_via(&v.jacobian_z(&z).unwrap(), &v, &z, &batch).unwrap();
        prop_assert!(rel_err(j.as_slice(), via.as_slice()) < 1e-10);
    }

    #[test]
    fn layout_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let arch = small_main(&mut r);
        let w = uniform_vec(&mut r, arch.param_count(), -1.0, 1.0);
        let weights = MainNetWeights::new(arch.clone(), w.clone()).unwrap();
        let back = MainNetWeights::flatten(arch.clone(), &weights.unflatten()).unwrap();
        prop_assert_eq!(back.as_slice(), &w[..]);
        let d: usize = arch.layers().iter().map(|s| (s.fan_in + 1) * s.fan_out).sum();
        prop_assert_eq!(arch.param_count(), d);
    }
}

#[test]
fn hand_built_unit() {
    // p=0.2, a=0.1, b=0, c=2, d=0.5: f = 2 sin(30 · 0.1 · 0.2) + 0.5.
    let arch = MainNetArch::new(1, vec![1], 1, 30.0).unwrap();
    let w = MainNetWeights::new(arch, vec![0.1, 0.0, 2.0, 0.5]).unwrap();
    let f = w.forward(&[0.2]).unwrap();
    assert!((f[0] - 1.629_284_946_790_070_7).abs() < 1e-14, "{}", f[0]);
    assert!((f[0] - 1.62928).abs() < 1e-5);
    let mut tape = PointTape::default();
    tape.forward(&w, &[0.2]).unwrap();
    let g = tape.backward(&w, &[1.0]).unwrap();
    assert!((g.weights[2] - 0.6f64.sin()).abs() < 1e-15);
}

#[test]
fn recon_loss_zero_on_exact_targets() {
    let mut r = rng(3);
    let arch = small_hyper(&mut r);
    let v = random_hyper(&arch, &mut r);
    let z = uniform_vec(&mut r, arch.latent_dim, -1.0, 1.0);
    let coords = uniform_vec(&mut r, 4 * arch.main.input_dim, -1.0, 1.0);
    let mut tape = GridTape::new();
    let targets = tape
        .forward(&arch.main, v.forward(&z).unwrap().as_slice(), &coords)
        .unwrap()
        .to_vec();
    let batch =
        SampleBatch::new(&coords, &targets, arch.main.input_dim, arch.main.output_dim).unwrap();
    let l = recon_loss(&v, &z, &batch).unwrap();
    assert_eq!(l.loss, 0.0);
    assert!(l.residuals.iter().all(|&e| e == 0.0));
    let g = latent_gradient(&v, &z, &batch, 0).unwrap();
    assert!(g.g.iter().all(|&x| x == 0.0));
}
