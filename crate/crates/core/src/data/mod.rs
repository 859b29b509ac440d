//! Dataset preparation: IDX parsing, image grids, point clouds with exact
//! nearest-neighbor unsigned distance sampling, and synthetic data.

pub mod cloud;
pub mod idx;
pub mod image;
pub mod kdtree;
pub mod synthetic;

pub use cloud::{sample_udf, udf_dataset, PointCloud, UdfSample, DEFAULT_QUERIES};
pub use idx::{encode_idx, parse_idx, parse_idx_images, parse_idx_labels, IdxArray};
pub use image::{make_grid, ImageDataset};
pub use kdtree::{brute_force_nn, KdTree};
pub use synthetic::{gen_synthetic, Synthetic, SyntheticKind, SyntheticSpec};
