//! Joint training and latent inference contracts.

mod common;

use common::*;
use hyperinr_core::data::{gen_synthetic, udf_dataset, Synthetic, SyntheticKind, SyntheticSpec};
use hyperinr_core::train::*;
use hyperinr_core::{init, FieldDataset, HyperNetArch, MainNetArch, Sequential};

fn arch(l: usize) -> HyperNetArch {
    let main = MainNetArch::new(2, vec![16, 16], 1, 30.0).unwrap();
    HyperNetArch::new(l, vec![32], 0, main).unwrap()
}

fn cfg(epochs: usize, batch_size: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size,
        lr_hyper: 1e-4,
        lr_latent: 1e-3,
        query_batch: None,
        seed: 3,
        target_loss: None,
    }
}

fn blobs(per_class: usize, size: usize) -> FieldDataset {
    let mut spec = SyntheticSpec::new(SyntheticKind::Blobs, 3, per_class, 21);
    spec.size = size;
    let Synthetic::Images(img) = gen_synthetic(&spec).unwrap() else {
        panic!("image kind")
    };
    img.to_fields().unwrap()
}

#[test]
fn constant_zero_target_is_fitted() {
    let ds = FieldDataset::shared(2, 1, grid(6, 6), vec![0.0; 36], vec![0]).unwrap();
    let (b, log) = train_joint(&arch(4), &ds, &cfg(300, 1), &Sequential, &mut |_| {}).unwrap();
    let final_loss = total_loss(&b.hyper, b.latents.as_slice(), &ds).unwrap();
    assert!(final_loss < 1e-4, "{final_loss}");
    assert!(log.epochs.iter().all(|e| e.mean_loss.is_finite()));
}

#[test]
fn total_loss_is_additive() {
    let ds = blobs(2, 8);
    let a = arch(5);
    let (v, z) = init::init_weights(&a, ds.len(), 7);
    let mut sum = 0.0;
    for j in 0..ds.len() {
        sum += recon_loss(&v, &z[j * 5..(j + 1) * 5], &ds.sample(j).unwrap())
            .unwrap()
            .loss;
    }
    assert_eq!(total_loss(&v, &z, &ds).unwrap(), sum);
    let empty = ds.subset(&[]).unwrap();
    assert_eq!(total_loss(&v, &[], &empty).unwrap(), 0.0);
}

#[test]
fn training_is_reproducible_and_converges() {
    let ds = blobs(4, 8);
    let mut c = cfg(2000, 12);
    c.target_loss = Some(1e-5);
    let run = || train_joint(&arch(6), &ds, &c, &Sequential, &mut |_| {}).unwrap();
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert!(
        la.epochs.len() > 50 && la.epochs.len() < 2000,
        "{} epochs",
        la.epochs.len()
    );
    assert!(la.epochs[49].mean_loss < la.epochs[0].mean_loss);
    // The latent gradient vanishes on the loss plateau.
    let first = la.epochs[0].mean_grad_norm;
    let last = la.last().unwrap().mean_grad_norm;
    assert!(last * 10.0 <= first, "grad norm {first} -> {last}");
}

#[test]
fn inference_freezes_the_hypernetwork() {
    let ds = blobs(2, 8);
    let (b, _) = train_joint(&arch(4), &ds, &cfg(100, 3), &Sequential, &mut |_| {}).unwrap();
    let frozen = b.hyper.clone();
    let start = b.latents.as_slice().to_vec();
    let before = sample_losses(&b.hyper, &start, &ds, 3, &Sequential).unwrap();
    let (z, log) = infer_latents(
        &b.hyper,
        &ds,
        &cfg(50, 3),
        LatentStart::Given(start),
        &Sequential,
        &mut |_| {},
    )
    .unwrap();
    assert_eq!(b.hyper, frozen);
    assert_eq!(log.epochs.len(), 50);
    let after = sample_losses(&b.hyper, z.as_slice(), &ds, 3, &Sequential).unwrap();
    for (a, s) in after.iter().zip(&before) {
        assert!(a <= s);
    }

    let (fresh, _) = infer_latents(
        &b.hyper,
        &ds,
        &cfg(50, 3),
        LatentStart::Random(1),
        &Sequential,
        &mut |_| {},
    )
    .unwrap();
    assert_eq!(fresh.rows(), ds.len());
}

#[test]
fn query_subsampling_for_distance_fields() {
    let spec = SyntheticSpec::new(SyntheticKind::Superquadrics, 2, 1, 5);
    let Synthetic::Clouds { clouds, labels } = gen_synthetic(&spec).unwrap() else {
        panic!("cloud kind")
    };
    let ds = udf_dataset(&clouds, labels, 500, 5).unwrap();
    let main = MainNetArch::new(3, vec![16], 1, 30.0).unwrap();
    let a = HyperNetArch::new(4, vec![16], 0, main).unwrap();
    let mut c = cfg(20, 2);
    c.query_batch = Some(64);
    let run = || train_joint(&a, &ds, &c, &Sequential, &mut |_| {}).unwrap();
    let (x, lx) = run();
    let (y, ly) = run();
    assert_eq!(x, y);
    assert_eq!(lx, ly);
    assert!(lx.epochs.iter().all(|e| e.mean_loss.is_finite()));
}

#[test]
fn invalid_configs() {
    let ds = blobs(1, 4);
    let mut c = cfg(1, 0);
    assert!(train_joint(&arch(2), &ds, &c, &Sequential, &mut |_| {}).is_err());
    c.batch_size = 1;
    c.lr_latent = -1.0;
    assert!(train_joint(&arch(2), &ds, &c, &Sequential, &mut |_| {}).is_err());
}

#[test]
fn latent_gradients_shrink_at_a_plateau() {
    use hyperinr_core::diagnostics::latent_gradient;
    let ds = blobs(1, 8);
    let a = arch(6);
    let mean_norm = |v: &hyperinr_core::HyperNetParams, z: &[f64]| {
        (0..ds.len())
            .map(|j| {
                latent_gradient(v, &z[j * 6..(j + 1) * 6], &ds.sample(j).unwrap(), j)
                    .unwrap()
                    .norm
            })
            .sum::<f64>()
            / ds.len() as f64
    };
    let c = cfg(3000, 3);
    let (v0, z0) = init::init_weights(&a, ds.len(), c.seed);
    let start = mean_norm(&v0, &z0);
    let (b, _) = train_joint(&a, &ds, &c, &Sequential, &mut |_| {}).unwrap();
    let end = mean_norm(&b.hyper, b.latents.as_slice());
    assert!(end * 10.0 <= start, "init {start:.3e}, trained {end:.3e}");
}
