//! Tasks on fitted representations: classification over latents or
//! generated weights, PCA projections, and latent interpolation.

pub mod classifier;
pub mod interp;
pub mod pca;

pub use classifier::{
    accuracy, argmax, classify, softmax, train_classifier, ClassifierConfig, ClassifierModel,
    Standardizer,
};
pub use interp::{decode, interpolate_latents, interpolation_alphas, Interpolant};
pub use pca::{pca_fit, pca_transform, PcaProjection};
