//! Hypernetwork-generated SIREN implicit neural representations.
//!
//! A shared hypernetwork maps a small per-sample latent vector `z` to the
//! full weight vector `w` of a sine-activated coordinate network. Training
//! optimizes the hypernetwork and all latents jointly; unseen samples are
//! embedded by optimizing only their latent against the frozen hypernetwork.
//!
//! Besides training, the crate carries the latent-space diagnostics
//! (latent gradients, Gauss-Newton Hessians, eigen-spectra and conditioning
//! tables), dataset preparation (coordinate grids, k-d tree unsigned
//! distance sampling, synthetic data) and the downstream tools
//! (classification over latents or weights, PCA, latent interpolation).
//!
//! The crate is `no_std` + `alloc`. The default `std` feature only enables
//! runtime CPU feature detection for the dense kernels; results are
//! computed with the same arithmetic either way.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

pub mod adam;
pub mod data;
pub mod diagnostics;
pub mod downstream;
pub mod error;
pub mod exec;
pub mod hypernet;
pub mod init;
mod layers;
pub mod linalg;
pub mod math;
pub mod model;
pub mod siren;
pub mod train;

pub use adam::AdamState;
pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use hypernet::{HyperNetArch, HyperNetParams};
pub use linalg::Matrix;
pub use model::{BundleMeta, Coords, FieldDataset, ModelBundle, SampleBatch};
pub use siren::{MainNetArch, MainNetWeights};
