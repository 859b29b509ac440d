//! Hessian, spectrum and conditioning-table properties.

mod common;

use common::*;
use hyperinr_core::data::{gen_synthetic, Synthetic, SyntheticKind, SyntheticSpec};
use hyperinr_core::diagnostics::*;
use hyperinr_core::linalg::{eigen_symmetric, Matrix};
use hyperinr_core::train::{recon_loss, train_joint, TrainConfig};
use hyperinr_core::{HyperNetArch, MainNetArch, SampleBatch, Sequential};
use proptest::prelude::*;

fn frobenius(a: &Matrix) -> f64 {
    a.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn report(id: usize, sigma_min: f64, sigma_max: f64) -> SampleDiagnosis {
    let h = Matrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => sigma_min,
        (1, 1) => sigma_max,
        _ => 0.0,
    });
    SampleDiagnosis {
        sample_id: id,
        loss: 0.0,
        grad_norm: 0.0,
        hessian: HessianReport::from_hessian(id, &h).map_err(|e| e.to_string()),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gauss_newton_hessian_is_psd(seed in any::<u64>(), n in 1usize..10) {
        let mut r = rng(seed);
        let arch = small_hyper(&mut r);
        let v = random_hyper(&arch, &mut r);
        let z = uniform_vec(&mut r, arch.latent_dim, -1.0, 1.0);
        let coords = uniform_vec(&mut r, n * arch.main.input_dim, -1.0, 1.0);
        let targets = uniform_vec(&mut r, n * arch.main.output_dim, 0.0, 1.0);
        let batch = SampleBatch::new(&coords, &targets, arch.main.input_dim, arch.main.output_dim).unwrap();
        let h = gauss_newton_hessian(&v, &z, &batch).unwrap();
        prop_assert_eq!(h.max_asymmetry(), 0.0);
        let rep = HessianReport::from_hessian(0, &h).unwrap();
        prop_assert!(rep.eigenvalues[0] >= -1e-10, "λmin {}", rep.eigenvalues[0]);
        prop_assert!(rep.psd_violation <= 1e-10);
        prop_assert!(rep.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        if rep.sigma_min > 0.0 {
            prop_assert_eq!(rep.kappa, rep.sigma_max / rep.sigma_min);
        } else {
            prop_assert!(rep.kappa.is_infinite());
        }
        let eig = eigen_symmetric(&h).unwrap();
        prop_assert!(diff_norm(&eig.reconstruct(), &h) <= 1e-10 * frobenius(&h).max(f64::MIN_POSITIVE));
    }

    #[test]
    fn tables_are_monotone(specs in prop::collection::vec((-8.0f64..2.0, 0.0f64..9.0), 1..40)) {
        let diags: Vec<SampleDiagnosis> = specs
            .iter()
            .enumerate()
            .map(|(i, &(lo, spread))| {
                let s = 10f64.powf(lo);
                report(i, s, s * 10f64.powf(spread))
            })
            .collect();
        let t = ConditioningTable::from_diagnoses("train", &diags, &Thresholds::default());
        prop_assert_eq!(t.evaluated, specs.len());
        for w in t.kappa_above.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 >= w[1].1);
        }
        for w in t.sigma_below.windows(2) {
            prop_assert!(w[0].0 > w[1].0 && w[0].1 >= w[1].1);
        }
        for &(_, p) in t.kappa_above.iter().chain(&t.sigma_below) {
            prop_assert!((0.0..=100.0).contains(&p));
        }
    }

    #[test]
    fn eigensolver_reconstructs(seed in any::<u64>(), n in 1usize..21) {
        let mut r = rng(seed);
        let a = Matrix::from_vec(n, n, uniform_vec(&mut r, n * n, -1.0, 1.0)).unwrap();
        let h = Matrix::from_fn(n, n, |i, j| a[(i, j)] + a[(j, i)]);
        let eig = eigen_symmetric(&h).unwrap();
        prop_assert!(diff_norm(&eig.reconstruct(), &h) <= 1e-10 * frobenius(&h));
        let vtv = eig.vectors.transpose().matmul(&eig.vectors).unwrap();
        prop_assert!(diff_norm(&vtv, &Matrix::identity(n)) <= 1e-10);
    }
}

#[test]
fn small_spectra() {
    let eig = eigen_symmetric(&Matrix::identity(4)).unwrap();
    assert_eq!(eig.values, vec![1.0; 4]);
    let d = Matrix::from_fn(3, 3, |i, j| if i == j { [9.0, 1.0, 4.0][i] } else { 0.0 });
    assert_eq!(eigen_symmetric(&d).unwrap().values, vec![1.0, 4.0, 9.0]);
}

#[test]
fn known_hessian_table() {
    let t =
        ConditioningTable::from_diagnoses("train", &[report(0, 1.0, 2.0)], &Thresholds::default());
    let above_1e3 = t.kappa_above.iter().find(|(k, _)| *k == 1e3).unwrap().1;
    assert_eq!(above_1e3, 0.0);
    assert_eq!(t.min_sigma, 1.0);
    assert_eq!(t.max_kappa, 2.0);
}

#[test]
fn zero_jacobian_gives_zero_hessian() {
    let h = gram(&Matrix::zeros(5, 3));
    assert_eq!(h, Matrix::zeros(3, 3));
}

#[test]
fn rank_condition() {
    assert!(rank_condition_check(784, 1, 20).satisfied);
    assert!(rank_condition_check(10_000, 1, 32).satisfied);
    let bad = rank_condition_check(10, 1, 20);
    assert!(!bad.satisfied);
    assert!(bad.warning().is_some());
    assert!(rank_condition_check(784, 1, 20).warning().is_none());
}

#[test]
fn vanishing_gradient_and_exact_hessian_at_a_fitted_sample() {
    let mut spec = SyntheticSpec::new(SyntheticKind::Blobs, 1, 1, 3);
    spec.size = 8;
    let Synthetic::Images(img) = gen_synthetic(&spec).unwrap() else {
        panic!("image kind")
    };
    let ds = img.to_fields().unwrap();
    let main = MainNetArch::new(2, vec![16, 16], 1, 30.0).unwrap();
    let arch = HyperNetArch::new(8, vec![32], 0, main).unwrap();
    let cfg = TrainConfig {
        epochs: 20_000,
        batch_size: 1,
        lr_hyper: 1e-4,
        lr_latent: 1e-4,
        query_batch: None,
        seed: 1,
        target_loss: Some(1e-15),
    };
    let (bundle, _) = train_joint(&arch, &ds, &cfg, &Sequential, &mut |_| {}).unwrap();
    let z = bundle.latent(0).unwrap();
    let batch = ds.sample(0).unwrap();
    let loss = recon_loss(&bundle.hyper, z, &batch).unwrap().loss;
    assert!(loss < 1e-8, "loss {loss}");
    let g = latent_gradient(&bundle.hyper, z, &batch, 0).unwrap();
    assert!(g.norm < 1e-4, "grad {}", g.norm);
    let gn = gauss_newton_hessian(&bundle.hyper, z, &batch).unwrap();
    let fd = fd_hessian(&bundle.hyper, z, &batch, FD_HESSIAN_STEP).unwrap();
    let diff = max_abs_diff(gn.as_slice(), fd.as_slice());
    assert!(diff < 1e-6, "max |GN - FD| = {diff}");
}
