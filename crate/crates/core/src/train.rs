//! Reconstruction losses, joint training of hypernetwork and latents, and
//! latent inference against a frozen hypernetwork.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adam::AdamState;
use crate::error::{check_len, Error, Result};
use crate::exec::Executor;
use crate::hypernet::{HyperNetArch, HyperNetParams, HyperTape};
use crate::init;
use crate::linalg::Matrix;
use crate::math;
use crate::model::{BundleMeta, Coords, FieldDataset, ModelBundle, SampleBatch};
use crate::siren::{GridTape, MainNetArch};

/// Loss blow-up factor over the best epoch so far that aborts training.
pub const DIVERGENCE_FACTOR: f64 = 100.0;

/// Coordinates per main-network pass inside one sample.
pub const POINT_TILE: usize = 112;

const STREAM_SHUFFLE: u64 = 0x5348_5546;
const QUERY_KEY: u64 = 0x5155_4552_5953_4554;
const STREAM_INFER_LATENT: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Samples per optimizer step.
    pub batch_size: usize,
    pub lr_hyper: f64,
    pub lr_latent: f64,
    /// Query points drawn per sample and step from its own point set; `None`
    /// uses every point.
    pub query_batch: Option<usize>,
    pub seed: u64,
    /// Stops after the first epoch whose mean loss is at or below this.
    pub target_loss: Option<f64>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        for (name, lr) in [("hypernetwork", self.lr_hyper), ("latent", self.lr_latent)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::Config(alloc::format!(
                    "{name} learning rate must be positive"
                )));
            }
        }
        if self.query_batch == Some(0) {
            return Err(Error::Config("query batch must be positive".into()));
        }
        Ok(())
    }
}

/// One row of a [`TrainLog`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean over samples of `½ Σ ‖f − x‖²`.
    pub mean_loss: f64,
    /// Mean over samples of the per-point, per-channel squared error.
    pub mean_mse: f64,
    /// Mean over samples of `‖∇_z ℓ‖` at the latents before the update.
    pub mean_grad_norm: f64,
    /// Left at 0 by the core; filled by the epoch callback.
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainLog {
    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

/// `½ Σ_i ‖f(φ(v,z), p_i) − x_i‖²` with its residuals `f − x` (`n × c`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReconLoss {
    pub loss: f64,
    pub residuals: Vec<f64>,
}

fn check_sample(arch: &MainNetArch, batch: &SampleBatch<'_>) -> Result<()> {
    check_len("sample input dimension", arch.input_dim, batch.input_dim())?;
    check_len(
        "sample output dimension",
        arch.output_dim,
        batch.output_dim(),
    )
}

#[derive(Debug, Default)]
struct Scratch {
    tape: GridTape,
    residual: Vec<f64>,
    coords: Vec<f64>,
    targets: Vec<f64>,
    tile_grad: Vec<f64>,
}

impl Scratch {
    /// Forward on `coords`, residuals into `self.residual`, and optionally the
    /// weight gradient of the loss into `grad`. Points are processed in
    /// tiles of [`POINT_TILE`] so activations stay cache-resident.
    fn step(
        &mut self,
        arch: &MainNetArch,
        w: &[f64],
        coords: &[f64],
        targets: &[f64],
        mut grad: Option<&mut [f64]>,
    ) -> Result<f64> {
        let (p, c) = (arch.input_dim, arch.output_dim);
        let n = coords.len() / p;
        check_len("sample targets", n * c, targets.len())?;
        self.residual.clear();
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
            self.tile_grad.resize(g.len(), 0.0);
        }
        let mut sum = 0.0;
        let mut start = 0;
        while start < n {
            let end = (start + POINT_TILE).min(n);
            let out = self.tape.forward(arch, w, &coords[start * p..end * p])?;
            let first = self.residual.len();
            for (o, x) in out.iter().zip(&targets[start * c..end * c]) {
                let r = o - x;
                self.residual.push(r);
                sum += r * r;
            }
            if let Some(g) = grad.as_deref_mut() {
                self.tape
                    .backward(arch, w, &self.residual[first..], &mut self.tile_grad)?;
                for (a, b) in g.iter_mut().zip(&self.tile_grad) {
                    *a += b;
                }
            }
            start = end;
        }
        let loss = 0.5 * sum;
        if !loss.is_finite() {
            return Err(Error::Numeric("non-finite reconstruction".into()));
        }
        Ok(loss)
    }

    /// Like [`step`](Self::step), on a random subset of `m` points when
    /// `query` is `Some((m, rng))` and `m` is below the point count.
    fn sample_step(
        &mut self,
        arch: &MainNetArch,
        w: &[f64],
        batch: SampleBatch<'_>,
        query: Option<(usize, &mut ChaCha8Rng)>,
        grad: Option<&mut [f64]>,
    ) -> Result<(f64, usize)> {
        let n = batch.len();
        match query {
            Some((m, rng)) if m < n => {
                let (p, c) = (batch.input_dim(), batch.output_dim());
                let idx = rand::seq::index::sample(rng, n, m);
                self.coords.clear();
                self.targets.clear();
                for i in idx.iter() {
                    self.coords
                        .extend_from_slice(&batch.coords()[i * p..(i + 1) * p]);
                    self.targets
                        .extend_from_slice(&batch.targets()[i * c..(i + 1) * c]);
                }
                let coords = core::mem::take(&mut self.coords);
                let targets = core::mem::take(&mut self.targets);
                let r = self.step(arch, w, &coords, &targets, grad);
                self.coords = coords;
                self.targets = targets;
                Ok((r?, m))
            }
            _ => Ok((
                self.step(arch, w, batch.coords(), batch.targets(), grad)?,
                n,
            )),
        }
    }
}

/// Reconstruction loss of one sample.
pub fn recon_loss(v: &HyperNetParams, z: &[f64], batch: &SampleBatch<'_>) -> Result<ReconLoss> {
    let arch = &v.arch().main;
    check_sample(arch, batch)?;
    let w = v.forward(z)?;
    let mut s = Scratch::default();
    let loss = s.step(arch, w.as_slice(), batch.coords(), batch.targets(), None)?;
    Ok(ReconLoss {
        loss,
        residuals: s.residual,
    })
}

/// Sum of per-sample reconstruction losses in sample order. `latents` is
/// `t × l` row-major.
pub fn total_loss(v: &HyperNetParams, latents: &[f64], dataset: &FieldDataset) -> Result<f64> {
    let l = v.arch().latent_dim;
    check_len("latent matrix", dataset.len() * l, latents.len())?;
    let mut total = 0.0;
    for j in 0..dataset.len() {
        total += recon_loss(v, &latents[j * l..(j + 1) * l], &dataset.sample(j)?)?.loss;
    }
    Ok(total)
}

/// Per-sample reconstruction losses on every point, batched through the
/// executor.
pub fn sample_losses<E: Executor>(
    v: &HyperNetParams,
    latents: &[f64],
    dataset: &FieldDataset,
    batch_size: usize,
    exec: &E,
) -> Result<Vec<f64>> {
    let arch = v.arch();
    let l = arch.latent_dim;
    check_len("latent matrix", dataset.len() * l, latents.len())?;
    check_dataset(&arch.main, dataset)?;
    let d = arch.output_dim();
    let mut losses = vec![0.0; dataset.len()];
    let mut tape = HyperTape::new();
    let mut scratch: Vec<Scratch> = (0..exec.workers().max(1))
        .map(|_| Scratch::default())
        .collect();
    let ids: Vec<usize> = (0..dataset.len()).collect();
    for chunk in ids.chunks(batch_size.max(1)) {
        let rows = &latents[chunk[0] * l..(chunk[chunk.len() - 1] + 1) * l];
        let ws = tape.forward(v, rows)?;
        let mut jobs: Vec<Job<'_>> = chunk
            .iter()
            .zip(ws.chunks_exact(d))
            .map(|(&sample, w)| Job {
                sample,
                w,
                grad: None,
                loss: 0.0,
                points: 0,
                err: None,
            })
            .collect();
        exec.for_each(&mut scratch, &mut jobs, |s, _, job| {
            let r = dataset
                .sample(job.sample)
                .and_then(|b| s.sample_step(&arch.main, job.w, b, None, None));
            match r {
                Ok((loss, n)) => {
                    job.loss = loss;
                    job.points = n;
                }
                Err(e) => job.err = Some(e),
            }
        });
        for job in jobs {
            if let Some(e) = job.err {
                return Err(e);
            }
            losses[job.sample] = job.loss;
        }
    }
    Ok(losses)
}

fn check_dataset(arch: &MainNetArch, dataset: &FieldDataset) -> Result<()> {
    check_len(
        "dataset input dimension",
        arch.input_dim,
        dataset.input_dim(),
    )?;
    check_len(
        "dataset output dimension",
        arch.output_dim,
        dataset.output_dim(),
    )
}

struct Job<'a> {
    sample: usize,
    w: &'a [f64],
    grad: Option<&'a mut [f64]>,
    loss: f64,
    points: usize,
    err: Option<Error>,
}

fn query_rng(seed: u64, epoch: usize, sample: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ QUERY_KEY);
    rng.set_stream(((epoch as u64) << 32) ^ sample as u64);
    rng
}

/// Shared optimization loop. With `adam_v = None` the hypernetwork stays
/// frozen and only latents move.
#[allow(clippy::too_many_arguments)]
fn optimize<E: Executor>(
    v: &mut HyperNetParams,
    mut adam_v: Option<&mut AdamState>,
    latents: &mut [f64],
    dataset: &FieldDataset,
    cfg: &TrainConfig,
    exec: &E,
    mut best: Option<&mut BestIterate>,
    on_epoch: &mut dyn FnMut(&mut EpochStats),
) -> Result<TrainLog> {
    cfg.validate()?;
    let arch = v.arch().clone();
    check_dataset(&arch.main, dataset)?;
    let (t, l, d) = (dataset.len(), arch.latent_dim, arch.output_dim());
    check_len("latent matrix", t * l, latents.len())?;
    if t == 0 {
        return Ok(TrainLog::default());
    }
    let query = match dataset.coords() {
        Coords::PerSample(_) => cfg.query_batch,
        Coords::Shared(_) => None,
    };

    let mut adam_z: Vec<AdamState> = (0..t).map(|_| AdamState::new(l)).collect();
    let mut order: Vec<usize> = (0..t).collect();
    let mut shuffle = init::rng(cfg.seed, STREAM_SHUFFLE);
    let mut tape = HyperTape::new();
    let mut scratch: Vec<Scratch> = (0..exec.workers().max(1))
        .map(|_| Scratch::default())
        .collect();
    let bs = cfg.batch_size.min(t);
    let mut zbatch = vec![0.0; bs * l];
    let mut upstream = vec![0.0; bs * d];
    let mut grad_z = vec![0.0; bs * l];
    let mut grad_v = vec![
        0.0;
        if adam_v.is_some() {
            v.as_slice().len()
        } else {
            0
        }
    ];
    let mut log = TrainLog::default();
    let mut min_loss = f64::INFINITY;
    let diverged = |epoch: usize, reason: &str| Error::Diverged {
        epoch,
        reason: reason.to_string(),
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let (mut loss_sum, mut mse_sum, mut norm_sum) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(bs) {
            let b = chunk.len();
            for (row, &j) in chunk.iter().enumerate() {
                zbatch[row * l..(row + 1) * l].copy_from_slice(&latents[j * l..(j + 1) * l]);
            }
            let ws = tape.forward(v, &zbatch[..b * l])?;
            let mut jobs: Vec<Job<'_>> = chunk
                .iter()
                .zip(ws.chunks_exact(d))
                .zip(upstream.chunks_exact_mut(d))
                .map(|((&sample, w), g)| Job {
                    sample,
                    w,
                    grad: Some(g),
                    loss: 0.0,
                    points: 0,
                    err: None,
                })
                .collect();
            let main = &arch.main;
            exec.for_each(&mut scratch, &mut jobs, |s, _, job| {
                let mut rng = query.map(|_| query_rng(cfg.seed, epoch, job.sample));
                let q = query.zip(rng.as_mut());
                let r = dataset.sample(job.sample).and_then(|batch| {
                    s.sample_step(main, job.w, batch, q, job.grad.as_deref_mut())
                });
                match r {
                    Ok((loss, n)) => {
                        job.loss = loss;
                        job.points = n;
                    }
                    Err(e) => job.err = Some(e),
                }
            });
            let mut step_losses = Vec::with_capacity(b);
            for job in jobs {
                if let Some(e) = job.err {
                    return Err(match e {
                        Error::Numeric(msg) => diverged(epoch, &msg),
                        other => other,
                    });
                }
                loss_sum += job.loss;
                mse_sum += 2.0 * job.loss / (job.points * arch.main.output_dim) as f64;
                step_losses.push(job.loss);
            }

            let gv = if adam_v.is_some() {
                Some(&mut grad_v[..])
            } else {
                None
            };
            tape.backward(v, &upstream[..b * d], gv, &mut grad_z[..b * l])?;
            if let Some(adam) = adam_v.as_deref_mut() {
                adam.step("hypernetwork", v.as_mut_slice(), &grad_v, cfg.lr_hyper)
                    .map_err(|e| diverged(epoch, &e.to_string()))?;
            }
            for (row, &j) in chunk.iter().enumerate() {
                let g = &grad_z[row * l..(row + 1) * l];
                norm_sum += math::norm2(g);
                let z = &mut latents[j * l..(j + 1) * l];
                if let Some(best) = best.as_deref_mut() {
                    best.offer(j, z, step_losses[row]);
                }
                adam_z[j]
                    .step("latent", z, g, cfg.lr_latent)
                    .map_err(|e| diverged(epoch, &e.to_string()))?;
            }
        }

        let tf = t as f64;
        let mut stats = EpochStats {
            epoch,
            mean_loss: loss_sum / tf,
            mean_mse: mse_sum / tf,
            mean_grad_norm: norm_sum / tf,
            wall_secs: 0.0,
        };
        if !stats.mean_loss.is_finite() {
            return Err(diverged(epoch, "non-finite loss"));
        }
        // Near zero loss Adam jitters by orders of magnitude without
        // diverging, so a blow-up must also exceed the starting loss.
        let first = log.epochs.first().map_or(f64::INFINITY, |s| s.mean_loss);
        if stats.mean_loss > DIVERGENCE_FACTOR * min_loss && stats.mean_loss > first {
            return Err(diverged(epoch, "loss grew 100x above its minimum"));
        }
        min_loss = min_loss.min(stats.mean_loss);
        on_epoch(&mut stats);
        let reached = cfg.target_loss.is_some_and(|t| stats.mean_loss <= t);
        log.epochs.push(stats);
        if reached {
            break;
        }
    }
    Ok(log)
}

/// Lowest-loss latent seen per sample.
struct BestIterate {
    loss: Vec<f64>,
    latents: Vec<f64>,
    l: usize,
}

impl BestIterate {
    fn new(latents: &[f64], l: usize) -> Self {
        Self {
            loss: vec![f64::INFINITY; latents.len() / l],
            latents: latents.to_vec(),
            l,
        }
    }

    fn offer(&mut self, j: usize, z: &[f64], loss: f64) {
        if loss < self.loss[j] {
            self.loss[j] = loss;
            self.latents[j * self.l..(j + 1) * self.l].copy_from_slice(z);
        }
    }
}

/// Jointly fits hypernetwork parameters and one latent per sample.
/// Deterministic in `cfg.seed` for any executor.
pub fn train_joint<E: Executor>(
    arch: &HyperNetArch,
    dataset: &FieldDataset,
    cfg: &TrainConfig,
    exec: &E,
    on_epoch: &mut dyn FnMut(&mut EpochStats),
) -> Result<(ModelBundle, TrainLog)> {
    arch.validate()?;
    let (mut v, mut z) = init::init_weights(arch, dataset.len(), cfg.seed);
    let mut adam_v = AdamState::new(v.as_slice().len());
    let log = optimize(
        &mut v,
        Some(&mut adam_v),
        &mut z,
        dataset,
        cfg,
        exec,
        None,
        on_epoch,
    )?;
    let latents = Matrix::from_vec(dataset.len(), arch.latent_dim, z)?;
    let meta = BundleMeta {
        fingerprint: [0; 32],
        seed: cfg.seed,
    };
    let bundle = ModelBundle::new(v, latents, dataset.labels().to_vec(), meta)?;
    Ok((bundle, log))
}

/// Where latent inference starts.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentStart {
    /// Fresh latents drawn like the training ones, from this seed.
    Random(u64),
    /// Given `t × l` latents.
    Given(Vec<f64>),
}

/// Fits latents for `dataset` with `hyper` frozen. Returns, per sample, the
/// lowest-loss latent among all evaluated iterates (including the start and
/// the final one), and the per-epoch log.
pub fn infer_latents<E: Executor>(
    hyper: &HyperNetParams,
    dataset: &FieldDataset,
    cfg: &TrainConfig,
    start: LatentStart,
    exec: &E,
    on_epoch: &mut dyn FnMut(&mut EpochStats),
) -> Result<(Matrix, TrainLog)> {
    let l = hyper.arch().latent_dim;
    let t = dataset.len();
    let mut z = match start {
        LatentStart::Random(seed) => init::init_latents(t, l, seed, STREAM_INFER_LATENT),
        LatentStart::Given(z) => z,
    };
    check_len("initial latents", t * l, z.len())?;
    let mut frozen = hyper.clone();
    let mut best = BestIterate::new(&z, l);
    let log = optimize(
        &mut frozen,
        None,
        &mut z,
        dataset,
        cfg,
        exec,
        Some(&mut best),
        on_epoch,
    )?;
    debug_assert!(frozen == *hyper);

    if t > 0 && cfg.epochs > 0 {
        // The final iterate has not been scored yet.
        let finals = final_losses(hyper, &z, dataset, cfg, exec)?;
        for (j, loss) in finals.into_iter().enumerate() {
            best.offer(j, &z[j * l..(j + 1) * l], loss);
        }
    } else {
        best.latents = z;
    }
    Ok((Matrix::from_vec(t, l, best.latents)?, log))
}

fn final_losses<E: Executor>(
    hyper: &HyperNetParams,
    z: &[f64],
    dataset: &FieldDataset,
    cfg: &TrainConfig,
    exec: &E,
) -> Result<Vec<f64>> {
    let query = match dataset.coords() {
        Coords::PerSample(_) => cfg.query_batch,
        Coords::Shared(_) => None,
    };
    if query.is_none() {
        return sample_losses(hyper, z, dataset, cfg.batch_size, exec);
    }
    // Scored on a fresh subsample, like every other iterate.
    let arch = &hyper.arch().main;
    let l = hyper.arch().latent_dim;
    let mut s = Scratch::default();
    let mut out = Vec::with_capacity(dataset.len());
    for j in 0..dataset.len() {
        let w = hyper.forward(&z[j * l..(j + 1) * l])?;
        let mut rng = query_rng(cfg.seed, cfg.epochs + 1, j);
        let (loss, _) = s.sample_step(
            arch,
            w.as_slice(),
            dataset.sample(j)?,
            query.zip(Some(&mut rng)),
            None,
        )?;
        out.push(loss);
    }
    Ok(out)
}
