//! Principal component projections.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::linalg::{eigen_symmetric, gemm, MatView, Matrix};
use crate::math;

/// Above this feature count the top components come from subspace
/// iteration instead of a full covariance eigendecomposition.
pub const DENSE_LIMIT: usize = 256;
const OVERSAMPLE: usize = 8;
const MAX_ITERATIONS: usize = 1000;
const RITZ_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    pub mean: Vec<f64>,
    /// `k × f`, orthonormal rows.
    pub components: Matrix,
    /// Variance along each component.
    pub variances: Vec<f64>,
    /// Share of the total variance per component, non-increasing.
    pub explained_ratio: Vec<f64>,
}

fn centered(features: &Matrix, mean: &[f64]) -> Vec<f64> {
    let f = features.cols();
    let mut x = features.as_slice().to_vec();
    for row in x.chunks_exact_mut(f) {
        for (v, m) in row.iter_mut().zip(mean) {
            *v -= m;
        }
    }
    x
}

/// Flips each component so its largest-magnitude entry is positive (the
/// first such entry on ties).
fn fix_sign(c: &mut [f64]) {
    let mut best = 0;
    for (i, v) in c.iter().enumerate() {
        if v.abs() > c[best].abs() {
            best = i;
        }
    }
    if c[best] < 0.0 {
        for v in c.iter_mut() {
            *v = -*v;
        }
    }
}

/// Fits the top `k` components of the sample covariance (normalized by
/// `t - 1`).
pub fn pca_fit(features: &Matrix, k: usize) -> Result<PcaProjection> {
    let (t, f) = (features.rows(), features.cols());
    if k == 0 || t <= k || k > f {
        return Err(Error::Config(alloc::format!(
            "PCA needs 0 < k <= features and more samples than k (t = {t}, f = {f}, k = {k})"
        )));
    }
    if !features.is_finite() {
        return Err(Error::Numeric("non-finite PCA input".into()));
    }
    let mut mean = vec![0.0; f];
    for r in 0..t {
        for (m, v) in mean.iter_mut().zip(features.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= t as f64;
    }
    let x = centered(features, &mean);
    let norm = 1.0 / (t - 1) as f64;
    let total: f64 = x.iter().map(|v| v * v).sum::<f64>() * norm;

    let (values, mut comps) = if f <= DENSE_LIMIT {
        let mut cov = vec![0.0; f * f];
        let xv = MatView::new(&x, t, f);
        gemm(norm, xv.t(), xv, 0.0, &mut cov, f);
        let mut cov = Matrix::from_vec(f, f, cov)?;
        for i in 0..f {
            for j in i + 1..f {
                let m = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = m;
                cov[(j, i)] = m;
            }
        }
        let eig = eigen_symmetric(&cov)?;
        let mut values = Vec::with_capacity(k);
        let mut comps = Vec::with_capacity(k * f);
        for i in 0..k {
            let col = f - 1 - i;
            values.push(eig.values[col]);
            comps.extend(eig.vectors.column(col));
        }
        (values, comps)
    } else {
        subspace_top(&x, t, f, k, norm)?
    };

    for c in comps.chunks_exact_mut(f) {
        fix_sign(c);
    }
    let variances: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let explained_ratio = variances
        .iter()
        .map(|&v| {
            if total > 0.0 {
                (v / total).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(PcaProjection {
        mean,
        components: Matrix::from_vec(k, f, comps)?,
        variances,
        explained_ratio,
    })
}

/// Orthonormalizes the rows of `q` (`b × f`) by modified Gram-Schmidt.
fn orthonormalize(q: &mut [f64], f: usize) {
    let b = q.len() / f;
    for i in 0..b {
        for j in 0..i {
            let (done, rest) = q.split_at_mut(i * f);
            let qj = &done[j * f..(j + 1) * f];
            let qi = &mut rest[..f];
            let d = math::dot(qi, qj);
            for (a, c) in qi.iter_mut().zip(qj) {
                *a -= d * c;
            }
        }
        let qi = &mut q[i * f..(i + 1) * f];
        let n = math::norm2(qi);
        if n > 0.0 {
            qi.iter_mut().for_each(|v| *v /= n);
        } else {
            // Degenerate direction: restart from a coordinate axis.
            qi.fill(0.0);
            qi[i % f] = 1.0;
        }
    }
}

/// Top `k` eigenpairs of `norm · XᵀX` by block power iteration with
/// Rayleigh-Ritz.
fn subspace_top(
    x: &[f64],
    t: usize,
    f: usize,
    k: usize,
    norm: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = (k + OVERSAMPLE).min(f).min(t);
    let xv = MatView::new(x, t, f);
    // Deterministic start: rows of X itself, spread over the sample range.
    let mut q = vec![0.0; b * f];
    for i in 0..b {
        let r = i * t / b;
        q[i * f..(i + 1) * f].copy_from_slice(&x[r * f..(r + 1) * f]);
    }
    orthonormalize(&mut q, f);
    let mut xq = vec![0.0; t * b];
    let mut cq = vec![0.0; b * f];
    let mut prev = vec![f64::INFINITY; k];
    for _ in 0..MAX_ITERATIONS {
        // cq = norm · Qᵀ-side product: rows of (XᵀX Qᵀ)ᵀ.
        gemm(1.0, xv, MatView::new(&q, b, f).t(), 0.0, &mut xq, b);
        gemm(norm, MatView::new(&xq, t, b).t(), xv, 0.0, &mut cq, f);
        // Rayleigh quotients before re-orthonormalizing.
        let mut ritz = Vec::with_capacity(b);
        for i in 0..b {
            ritz.push(math::dot(&q[i * f..(i + 1) * f], &cq[i * f..(i + 1) * f]));
        }
        core::mem::swap(&mut q, &mut cq);
        orthonormalize(&mut q, f);
        let mut sorted = ritz.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let scale = sorted[0].abs().max(f64::MIN_POSITIVE);
        let converged = sorted[..k]
            .iter()
            .zip(&prev)
            .all(|(a, p)| (a - p).abs() <= RITZ_TOLERANCE * scale);
        prev.copy_from_slice(&sorted[..k]);
        if converged {
            break;
        }
    }
    // Rayleigh-Ritz on the converged basis.
    gemm(1.0, xv, MatView::new(&q, b, f).t(), 0.0, &mut xq, b);
    let mut small = vec![0.0; b * b];
    let xqv = MatView::new(&xq, t, b);
    gemm(norm, xqv.t(), xqv, 0.0, &mut small, b);
    let mut small = Matrix::from_vec(b, b, small)?;
    for i in 0..b {
        for j in i + 1..b {
            let m = 0.5 * (small[(i, j)] + small[(j, i)]);
            small[(i, j)] = m;
            small[(j, i)] = m;
        }
    }
    let eig = eigen_symmetric(&small)?;
    let mut values = Vec::with_capacity(k);
    let mut comps = vec![0.0; k * f];
    for i in 0..k {
        let col = b - 1 - i;
        values.push(eig.values[col]);
        let y = eig.vectors.column(col);
        gemm(
            1.0,
            MatView::new(&y, 1, b),
            MatView::new(&q, b, f),
            0.0,
            &mut comps[i * f..(i + 1) * f],
            f,
        );
    }
    Ok((values, comps))
}

/// Projects rows of `features` onto the fitted components (`t × k`).
pub fn pca_transform(proj: &PcaProjection, features: &Matrix) -> Result<Matrix> {
    let f = proj.mean.len();
    check_len("PCA feature dimension", f, features.cols())?;
    let x = centered(features, &proj.mean);
    let k = proj.components.rows();
    let t = features.rows();
    let mut out = vec![0.0; t * k];
    gemm(
        1.0,
        MatView::new(&x, t, f),
        proj.components.view().t(),
        0.0,
        &mut out,
        k,
    );
    Matrix::from_vec(t, k, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_data_has_one_component() {
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 2.0 * i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let p = pca_fit(&x, 1).unwrap();
        assert!((p.explained_ratio[0] - 1.0).abs() < 1e-12);
        let c = p.components.row(0);
        assert!((c[1] - 2.0 / math::sqrt(5.0)).abs() < 1e-12);
        let proj = pca_transform(
            &p,
            &Matrix::from_rows(core::slice::from_ref(&p.mean)).unwrap(),
        )
        .unwrap();
        assert_eq!(proj.as_slice(), &[0.0]);
    }

    #[test]
    fn degenerate_sizes_are_rejected() {
        let x = Matrix::zeros(2, 3);
        assert!(pca_fit(&x, 2).is_err());
        assert!(pca_fit(&x, 0).is_err());
    }
}
