//! Dense row-major matrices and the GEMM entry point used by every layer.

mod eigen;
mod matrix;

pub use eigen::{eigen_symmetric, SymmetricEigen, MAX_SWEEPS};
pub use matrix::{gemm, MatView, Matrix};
