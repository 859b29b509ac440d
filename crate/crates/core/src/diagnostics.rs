//! Latent-space diagnostics at a fitted latent: the latent gradient, the
//! Gauss-Newton Hessian `H = Σ_i J_iᵀ J_i` with `J_i = D₁f(w, p_i) · D₂φ(v, z)`,
//! its spectrum, dataset-level conditioning tables, and finite-difference
//! oracles for all of them.
//!
//! `H` equals the Hessian of the reconstruction loss in `z` only where the
//! residuals vanish; elsewhere it drops the second-order residual term.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::exec::Executor;
use crate::hypernet::HyperNetParams;
use crate::linalg::{eigen_symmetric, gemm, MatView, Matrix};
use crate::math;
use crate::model::{FieldDataset, SampleBatch};
use crate::siren::GridTape;
use crate::train::recon_loss;

/// Step for central differences of losses.
pub const FD_GRADIENT_STEP: f64 = 1e-6;
/// Step for central differences of gradients.
pub const FD_HESSIAN_STEP: f64 = 1e-5;

/// Condition-number thresholds `10^1 ..= 10^8`.
pub const KAPPA_THRESHOLDS: [f64; 8] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8];
/// Smallest-singular-value thresholds `10^2 ..= 10^-6`.
pub const SIGMA_THRESHOLDS: [f64; 9] = [1e2, 1e1, 1e0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// `ξ = ∇_z ℓ` for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGradient {
    pub sample_id: usize,
    pub g: Vec<f64>,
    pub norm: f64,
}

/// Loss and latent gradient of one sample.
pub fn latent_gradient(
    v: &HyperNetParams,
    z: &[f64],
    batch: &SampleBatch<'_>,
    sample_id: usize,
) -> Result<LatentGradient> {
    let (_, g) = loss_and_gradient(v, z, batch)?;
    let norm = math::norm2(&g);
    Ok(LatentGradient { sample_id, g, norm })
}

fn loss_and_gradient(
    v: &HyperNetParams,
    z: &[f64],
    batch: &SampleBatch<'_>,
) -> Result<(f64, Vec<f64>)> {
    let arch = &v.arch().main;
    check_len("sample input dimension", arch.input_dim, batch.input_dim())?;
    check_len(
        "sample output dimension",
        arch.output_dim,
        batch.output_dim(),
    )?;
    let w = v.forward(z)?;
    let mut tape = GridTape::new();
    let out = tape.forward(arch, w.as_slice(), batch.coords())?;
    let mut sum = 0.0;
    let residual: Vec<f64> = out
        .iter()
        .zip(batch.targets())
        .map(|(o, x)| {
            let r = o - x;
            sum += r * r;
            r
        })
        .collect();
    let loss = 0.5 * sum;
    if !loss.is_finite() {
        return Err(Error::Numeric("non-finite reconstruction".into()));
    }
    let mut gw = vec![0.0; w.as_slice().len()];
    tape.backward(arch, w.as_slice(), &residual, &mut gw)?;
    let (_, gz) = v.backward(z, &gw)?;
    if !gz.iter().all(|x| x.is_finite()) {
        return Err(Error::Numeric("non-finite latent gradient".into()));
    }
    Ok((loss, gz))
}

/// Stacked per-point Jacobians `J_i` (`n·c × l`, point-major).
pub fn latent_jacobian(v: &HyperNetParams, z: &[f64], batch: &SampleBatch<'_>) -> Result<Matrix> {
    let arch = &v.arch().main;
    check_len("sample input dimension", arch.input_dim, batch.input_dim())?;
    check_len(
        "sample output dimension",
        arch.output_dim,
        batch.output_dim(),
    )?;
    let l = v.arch().latent_dim;
    let w = v.forward(z)?;
    let dphi = v.jacobian_z(z)?.transpose(); // l × d, row k = ∂w/∂z_k
    let mut tape = GridTape::new();
    tape.forward(arch, w.as_slice(), batch.coords())?;
    let nc = batch.len() * arch.output_dim;
    let mut tangents = vec![0.0; l * nc];
    tape.jvp(arch, w.as_slice(), dphi.as_slice(), &mut tangents)?;
    let jt = Matrix::from_vec(l, nc, tangents)?;
    let j = jt.transpose();
    if !j.is_finite() {
        return Err(Error::Numeric("non-finite latent Jacobian".into()));
    }
    Ok(j)
}

/// Gauss-Newton Hessian of the reconstruction loss in `z` (`l × l`),
/// symmetrized.
pub fn gauss_newton_hessian(
    v: &HyperNetParams,
    z: &[f64],
    batch: &SampleBatch<'_>,
) -> Result<Matrix> {
    let j = latent_jacobian(v, z, batch)?;
    Ok(gram(&j))
}

/// `JᵀJ`, symmetrized.
pub fn gram(j: &Matrix) -> Matrix {
    let l = j.cols();
    let mut h = vec![0.0; l * l];
    gemm(1.0, j.view().t(), j.view(), 0.0, &mut h, l);
    let mut h = Matrix::from_vec(l, l, h).expect("square");
    symmetrize(&mut h);
    h
}

fn symmetrize(h: &mut Matrix) {
    let n = h.rows();
    for i in 0..n {
        for k in i + 1..n {
            let m = 0.5 * (h[(i, k)] + h[(k, i)]);
            h[(i, k)] = m;
            h[(k, i)] = m;
        }
    }
}

/// Spectrum summary of one Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianReport {
    pub sample_id: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Smallest eigenvalue clamped at 0.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// `sigma_max / sigma_min`, or infinity when `sigma_min` is 0.
    pub kappa: f64,
    /// `max(0, -λ_min)`.
    pub psd_violation: f64,
}

impl HessianReport {
    pub fn from_hessian(sample_id: usize, h: &Matrix) -> Result<Self> {
        let eig = eigen_symmetric(h)?;
        let lo = eig.values.first().copied().unwrap_or(0.0);
        let hi = eig.values.last().copied().unwrap_or(0.0);
        let sigma_min = lo.max(0.0);
        let sigma_max = hi.max(0.0);
        let kappa = if sigma_min > 0.0 {
            sigma_max / sigma_min
        } else {
            f64::INFINITY
        };
        Ok(Self {
            sample_id,
            eigenvalues: eig.values,
            sigma_min,
            sigma_max,
            kappa,
            psd_violation: (-lo).max(0.0),
        })
    }
}

/// Everything computed for one sample of a diagnostic sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDiagnosis {
    pub sample_id: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub hessian: core::result::Result<HessianReport, String>,
}

pub fn diagnose_sample(
    v: &HyperNetParams,
    z: &[f64],
    batch: &SampleBatch<'_>,
    sample_id: usize,
) -> SampleDiagnosis {
    let (loss, grad_norm) = match loss_and_gradient(v, z, batch) {
        Ok((loss, g)) => (loss, math::norm2(&g)),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let hessian = gauss_newton_hessian(v, z, batch)
        .and_then(|h| HessianReport::from_hessian(sample_id, &h))
        .map_err(|e| e.to_string());
    SampleDiagnosis {
        sample_id,
        loss,
        grad_norm,
        hessian,
    }
}

/// Threshold grids of a [`ConditioningTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub kappa: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            kappa: KAPPA_THRESHOLDS.to_vec(),
            sigma: SIGMA_THRESHOLDS.to_vec(),
        }
    }
}

/// Cumulative conditioning statistics over one split.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningTable {
    pub split: String,
    /// `(τ, % of samples with κ > τ)`.
    pub kappa_above: Vec<(f64, f64)>,
    /// `(τ, % of samples with σ_min < τ)`.
    pub sigma_below: Vec<(f64, f64)>,
    pub max_kappa: f64,
    pub min_sigma: f64,
    /// Samples with a usable Hessian; percentages are over these.
    pub evaluated: usize,
    pub failed: usize,
    pub mean_grad_norm: f64,
    pub mean_loss: f64,
}

impl ConditioningTable {
    pub fn from_diagnoses(split: &str, diags: &[SampleDiagnosis], thresholds: &Thresholds) -> Self {
        let reports: Vec<&HessianReport> = diags
            .iter()
            .filter_map(|d| d.hessian.as_ref().ok())
            .collect();
        let total = reports.len();
        let pct = |count: usize| {
            if total == 0 {
                0.0
            } else {
                100.0 * count as f64 / total as f64
            }
        };
        let mut kappa = thresholds.kappa.clone();
        kappa.sort_by(f64::total_cmp);
        let mut sigma = thresholds.sigma.clone();
        sigma.sort_by(|a, b| b.total_cmp(a));
        let kappa_above = kappa
            .iter()
            .map(|&t| (t, pct(reports.iter().filter(|r| r.kappa > t).count())))
            .collect();
        let sigma_below = sigma
            .iter()
            .map(|&t| (t, pct(reports.iter().filter(|r| r.sigma_min < t).count())))
            .collect();
        let finite: Vec<&SampleDiagnosis> = diags.iter().filter(|d| d.loss.is_finite()).collect();
        let mean = |f: fn(&SampleDiagnosis) -> f64| {
            if finite.is_empty() {
                f64::NAN
            } else {
                finite.iter().map(|d| f(d)).sum::<f64>() / finite.len() as f64
            }
        };
        Self {
            split: split.to_string(),
            kappa_above,
            sigma_below,
            max_kappa: reports.iter().map(|r| r.kappa).fold(f64::NAN, f64::max),
            min_sigma: reports.iter().map(|r| r.sigma_min).fold(f64::NAN, f64::min),
            evaluated: total,
            failed: diags.len() - total,
            mean_grad_norm: mean(|d| d.grad_norm),
            mean_loss: mean(|d| d.loss),
        }
    }
}

/// Per-sample diagnoses of every sample in `dataset` at the latent rows of
/// `latents`, plus the aggregated table. Per-sample failures are recorded,
/// not raised.
pub fn conditioning_tables<E: Executor>(
    v: &HyperNetParams,
    latents: &Matrix,
    dataset: &FieldDataset,
    split: &str,
    thresholds: &Thresholds,
    exec: &E,
) -> Result<(Vec<SampleDiagnosis>, ConditioningTable)> {
    check_len("latent rows", dataset.len(), latents.rows())?;
    check_len("latent dimension", v.arch().latent_dim, latents.cols())?;
    let mut items: Vec<Option<SampleDiagnosis>> = vec![None; dataset.len()];
    let mut scratch = vec![(); exec.workers().max(1)];
    exec.for_each(&mut scratch, &mut items, |_, j, slot| {
        *slot = Some(match dataset.sample(j) {
            Ok(batch) => diagnose_sample(v, latents.row(j), &batch, j),
            Err(e) => SampleDiagnosis {
                sample_id: j,
                loss: f64::NAN,
                grad_norm: f64::NAN,
                hessian: Err(e.to_string()),
            },
        });
    });
    let diags: Vec<SampleDiagnosis> = items
        .into_iter()
        .map(|d| d.expect("every slot filled"))
        .collect();
    let table = ConditioningTable::from_diagnoses(split, &diags, thresholds);
    Ok((diags, table))
}

/// Whether the stacked Jacobian can have full column rank: `n·c ≥ l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankCheck {
    pub n: usize,
    pub c: usize,
    pub l: usize,
    pub satisfied: bool,
}

impl RankCheck {
    /// Warning text when the condition fails.
    pub fn warning(&self) -> Option<String> {
        (!self.satisfied).then(|| {
            alloc::format!(
                "rank condition violated: n*c = {}*{} = {} < latent dim {}; the latent Hessian is singular",
                self.n,
                self.c,
                self.n * self.c,
                self.l
            )
        })
    }
}

pub fn rank_condition_check(n: usize, c: usize, l: usize) -> RankCheck {
    RankCheck {
        n,
        c,
        l,
        satisfied: n.saturating_mul(c) >= l,
    }
}

/// Central-difference gradient of the reconstruction loss in `z`.
pub fn fd_latent_gradient(
    v: &HyperNetParams,
    z: &[f64],
    batch: &SampleBatch<'_>,
    h: f64,
) -> Result<Vec<f64>> {
    let mut zp = z.to_vec();
    let mut g = Vec::with_capacity(z.len());
    for k in 0..z.len() {
        zp[k] = z[k] + h;
        let up = recon_loss(v, &zp, batch)?.loss;
        zp[k] = z[k] - h;
        let down = recon_loss(v, &zp, batch)?.loss;
        zp[k] = z[k];
        g.push((up - down) / (2.0 * h));
    }
    Ok(g)
}

/// Full Hessian of the reconstruction loss in `z` by central differences of
/// the analytic gradient, symmetrized.
pub fn fd_hessian(
    v: &HyperNetParams,
    z: &[f64],
    batch: &SampleBatch<'_>,
    h: f64,
) -> Result<Matrix> {
    let l = z.len();
    let mut out = Matrix::zeros(l, l);
    let mut zp = z.to_vec();
    for k in 0..l {
        zp[k] = z[k] + h;
        let (_, up) = loss_and_gradient(v, &zp, batch)?;
        zp[k] = z[k] - h;
        let (_, down) = loss_and_gradient(v, &zp, batch)?;
        zp[k] = z[k];
        for i in 0..l {
            out[(i, k)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    symmetrize(&mut out);
    Ok(out)
}

/// `J` by central differences of the network outputs (`n·c × l`).
pub fn fd_latent_jacobian(
    v: &HyperNetParams,
    z: &[f64],
    batch: &SampleBatch<'_>,
    h: f64,
) -> Result<Matrix> {
    let l = z.len();
    let arch = &v.arch().main;
    let nc = batch.len() * arch.output_dim;
    let mut out = Matrix::zeros(nc, l);
    let mut zp = z.to_vec();
    let mut tape = GridTape::new();
    for k in 0..l {
        zp[k] = z[k] + h;
        let up = tape
            .forward(arch, v.forward(&zp)?.as_slice(), batch.coords())?
            .to_vec();
        zp[k] = z[k] - h;
        let down = tape.forward(arch, v.forward(&zp)?.as_slice(), batch.coords())?;
        zp[k] = z[k];
        for i in 0..nc {
            out[(i, k)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Stacked Jacobian through an explicit `d × l` hypernetwork Jacobian, for
/// cross-checking [`latent_jacobian`].
pub fn latent_jacobian_via(
    dphi: &Matrix,
    v: &HyperNetParams,
    z: &[f64],
    batch: &SampleBatch<'_>,
) -> Result<Matrix> {
    let arch = &v.arch().main;
    let w = v.forward(z)?;
    let n = batch.len();
    let c = arch.output_dim;
    let d = w.as_slice().len();
    let l = dphi.cols();
    let mut out = Matrix::zeros(n * c, l);
    // Row of D₁f per point and channel via one-hot cotangents.
    let mut upstream = vec![0.0; n * c];
    let mut gw = vec![0.0; d];
    let mut single = GridTape::new();
    for i in 0..n {
        let p = &batch.coords()[i * arch.input_dim..(i + 1) * arch.input_dim];
        single.forward(arch, w.as_slice(), p)?;
        for ch in 0..c {
            upstream[..c].fill(0.0);
            upstream[ch] = 1.0;
            single.backward(arch, w.as_slice(), &upstream[..c], &mut gw)?;
            let mut row = vec![0.0; l];
            gemm(1.0, MatView::new(&gw, 1, d), dphi.view(), 0.0, &mut row, l);
            out.row_mut(i * c + ch).copy_from_slice(&row);
        }
    }
    Ok(out)
}
