use alloc::vec::Vec;

use super::Matrix;
use crate::error::{Error, Result};
use crate::math::sqrt;

pub const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix,
    pub sweeps: usize,
}

impl SymmetricEigen {
    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.values.len();
        Matrix::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)])
                .sum()
        })
    }
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps over all pairs `(p, q)` until the off-diagonal Frobenius norm falls
/// below `1e-12 · ‖H‖_F`. The input must be symmetric to within `1e-10`
/// (relative to `max(1, ‖H‖_F)`); it is symmetrized before iterating.
pub fn eigen_symmetric(h: &Matrix) -> Result<SymmetricEigen> {
    let n = h.rows();
    if h.cols() != n {
        return Err(Error::Shape {
            what: "eigen_symmetric square input",
            expected: n,
            got: h.cols(),
        });
    }
    if !h.is_finite() {
        return Err(Error::Numeric("non-finite eigensolver input".into()));
    }
    let norm = h.frobenius_norm();
    if h.max_asymmetry() > SYMMETRY_TOL * norm.max(1.0) {
        return Err(Error::Config(
            "eigen_symmetric input is not symmetric".into(),
        ));
    }

    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
    let mut v = Matrix::identity(n);
    let target = OFF_DIAGONAL_TOL * norm;

    let mut sweeps = 0;
    loop {
        if off_diagonal_norm(&a) <= target {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                rotate(&mut a, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sqrt(sum)
}

// A ← Jᵀ A J and V ← V J with J the (p, q) plane rotation [[c, s], [-s, c]].
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_spectrum() {
        let e = eigen_symmetric(&Matrix::identity(4)).unwrap();
        assert_eq!(e.values, [1.0; 4]);
        assert_eq!(e.sweeps, 0);
    }

    #[test]
    fn diagonal_is_sorted_ascending() {
        let h = Matrix::from_rows(&[[9.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 4.0]]).unwrap();
        let e = eigen_symmetric(&h).unwrap();
        assert_eq!(e.values, [1.0, 4.0, 9.0]);
        assert_eq!(e.vectors.column(0), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let h = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = eigen_symmetric(&h).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!((e.values[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        let h = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(eigen_symmetric(&h), Err(Error::Config(_))));
        assert!(matches!(
            eigen_symmetric(&Matrix::zeros(2, 3)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn zero_and_empty_matrices() {
        let e = eigen_symmetric(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e.values, [0.0; 3]);
        assert!(eigen_symmetric(&Matrix::zeros(0, 0))
            .unwrap()
            .values
            .is_empty());
    }
}
