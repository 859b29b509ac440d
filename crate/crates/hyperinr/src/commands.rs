//! Command implementations. Each writes its artifacts atomically and
//! returns their paths.

use std::path::{Path, PathBuf};

use hyperinr_core::diagnostics::conditioning_tables;
use hyperinr_core::downstream::{
    accuracy, interpolate_latents, pca_fit, pca_transform, train_classifier, ClassifierConfig,
};
use hyperinr_core::train::{
    infer_latents, recon_loss, train_joint, EpochStats, LatentStart, TrainConfig, TrainLog,
};
use hyperinr_core::{Error, Matrix, ModelBundle};

use crate::config::{hex, ExperimentConfig, Source};
use crate::dataset::{load_split, Loaded, Split};
use crate::error::{CliError, Result};
use crate::exec::Threads;
use crate::fsutil::{read, write_atomic};
use crate::latents::LatentFile;
use crate::report::{self, AccuracyReport};
use crate::{bundle, latents};

/// Representation fed to downstream models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repr {
    /// Latent embeddings.
    Z,
    /// Generated main-network weights.
    W,
}

impl Repr {
    pub fn name(self) -> &'static str {
        match self {
            Repr::Z => "z",
            Repr::W => "w",
        }
    }
}

impl std::str::FromStr for Repr {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "z" => Ok(Repr::Z),
            "w" => Ok(Repr::W),
            _ => Err(format!("unknown representation {s:?} (expected z or w)")),
        }
    }
}

/// Shared state of one command invocation.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub exec: Threads,
    /// Accept artifacts whose fingerprint differs from the config.
    pub force: bool,
}

impl Ctx {
    pub fn new(cfg: ExperimentConfig, threads: usize, force: bool) -> Self {
        if let Ok(rank) = cfg.rank_check() {
            if let Some(w) = rank.warning() {
                log::warn!("{w}");
            }
        }
        Self {
            cfg,
            exec: Threads::new(threads),
            force,
        }
    }

    fn out(&self, name: String) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    pub fn bundle_path(&self, seed: u64) -> PathBuf {
        self.out(format!("bundle-s{seed}.hinr"))
    }

    pub fn latents_path(&self, split: Split, seed: u64) -> PathBuf {
        self.out(format!("latents-{}-s{seed}.hlat", split.name()))
    }

    fn check_fingerprint(&self, path: &Path, fp: &[u8; 32]) -> Result<()> {
        if *fp == self.cfg.fingerprint() {
            return Ok(());
        }
        if self.force {
            log::warn!(
                "{}: fingerprint {} differs from the config, continuing (--force)",
                path.display(),
                hex(fp)
            );
            return Ok(());
        }
        Err(CliError::Fingerprint {
            path: path.to_path_buf(),
        })
    }

    /// Loads a bundle and checks it against the config.
    pub fn load_bundle(&self, path: &Path) -> Result<ModelBundle> {
        let b = bundle::decode(&read(path)?).map_err(|e| CliError::format(path, e))?;
        if *b.arch() != self.cfg.arch {
            return Err(CliError::format(
                path,
                Error::Format {
                    offset: 0,
                    reason: format!(
                        "architecture {:?} does not match the config {:?}",
                        b.arch(),
                        self.cfg.arch
                    ),
                },
            ));
        }
        self.check_fingerprint(path, &b.meta.fingerprint)?;
        Ok(b)
    }

    pub fn load_latents(&self, path: &Path, bundle: &ModelBundle) -> Result<LatentFile> {
        let f = latents::decode(&read(path)?).map_err(|e| CliError::format(path, e))?;
        if f.latents.cols() != bundle.arch().latent_dim {
            return Err(CliError::format(
                path,
                Error::Shape {
                    what: "latent dimension",
                    expected: bundle.arch().latent_dim,
                    got: f.latents.cols(),
                },
            ));
        }
        self.check_fingerprint(path, &f.fingerprint)?;
        Ok(f)
    }

    fn split(&self, split: Split) -> Result<Loaded> {
        load_split(&self.cfg, split)?.ok_or_else(|| {
            CliError::Config(format!("the config selects no {} samples", split.name()))
        })
    }
}

/// Stamps each epoch with its wall time and logs progress.
fn progress(what: &'static str, total: usize) -> impl FnMut(&mut EpochStats) {
    let mut last = std::time::Instant::now();
    move |s: &mut EpochStats| {
        let now = std::time::Instant::now();
        s.wall_secs = (now - last).as_secs_f64();
        last = now;
        if s.epoch == 1 || s.epoch.is_multiple_of(10) || s.epoch == total {
            log::info!(
                "{what} epoch {}/{total}: loss {:.5} mse {:.3e} |grad z| {:.3e} ({:.1}s)",
                s.epoch,
                s.mean_loss,
                s.mean_mse,
                s.mean_grad_norm,
                s.wall_secs
            );
        }
    }
}

#[derive(Debug)]
pub struct Trained {
    pub bundle: ModelBundle,
    pub log: TrainLog,
    pub bundle_path: PathBuf,
    pub log_path: PathBuf,
}

/// Joint training with the given seed.
pub fn train(ctx: &Ctx, seed: u64) -> Result<Trained> {
    let data = ctx.split(Split::Train)?;
    let cfg = TrainConfig {
        seed,
        ..ctx.cfg.train.clone()
    };
    log::info!(
        "training {} samples, {} hypernetwork parameters, seed {seed}",
        data.fields.len(),
        ctx.cfg.arch.param_count()
    );
    let (mut b, log) = train_joint(
        &ctx.cfg.arch,
        &data.fields,
        &cfg,
        &ctx.exec,
        &mut progress("train", cfg.epochs),
    )?;
    b.meta.fingerprint = ctx.cfg.fingerprint();
    let bundle_path = ctx.bundle_path(seed);
    let log_path = ctx.out(format!("train-log-s{seed}.csv"));
    write_atomic(&bundle_path, &bundle::encode(&b))?;
    report::write_train_log(&log_path, &b.meta.fingerprint, &log)?;
    Ok(Trained {
        bundle: b,
        log,
        bundle_path,
        log_path,
    })
}

#[derive(Debug)]
pub struct Inferred {
    pub file: LatentFile,
    pub log: TrainLog,
    pub path: PathBuf,
}

/// Fits latents of `split` against the frozen hypernetwork. `warm` starts
/// training samples at their trained latents.
pub fn infer(ctx: &Ctx, bundle_path: &Path, split: Split, warm: bool) -> Result<Inferred> {
    let b = ctx.load_bundle(bundle_path)?;
    let data = ctx.split(split)?;
    let i = &ctx.cfg.infer;
    let cfg = TrainConfig {
        epochs: i.epochs,
        batch_size: i.batch_size,
        lr_latent: i.lr_latent,
        seed: i.seed,
        target_loss: None,
        ..ctx.cfg.train.clone()
    };
    let start = match (warm, split) {
        (true, Split::Train) => LatentStart::Given(b.latents.as_slice().to_vec()),
        (true, Split::Test) => {
            return Err(CliError::Config(
                "warm starts only exist for the training split".into(),
            ))
        }
        (false, _) => LatentStart::Random(i.seed),
    };
    log::info!("inferring {} {} latents", data.fields.len(), split.name());
    let (z, log) = infer_latents(
        &b.hyper,
        &data.fields,
        &cfg,
        start,
        &ctx.exec,
        &mut progress("infer", cfg.epochs),
    )?;
    let file = LatentFile {
        fingerprint: b.meta.fingerprint,
        bundle_seed: b.meta.seed,
        split,
        latents: z,
        labels: data.fields.labels().to_vec(),
    };
    let path = ctx.latents_path(split, b.meta.seed);
    write_atomic(&path, &latents::encode(&file))?;
    report::write_train_log(
        &ctx.out(format!("infer-log-{}-s{}.csv", split.name(), b.meta.seed)),
        &file.fingerprint,
        &log,
    )?;
    Ok(Inferred { file, log, path })
}

/// Latents of `split`: the bundle's own for training unless a file is
/// given, else the inferred file.
fn split_latents(
    ctx: &Ctx,
    b: &ModelBundle,
    split: Split,
    file: Option<&Path>,
) -> Result<(Matrix, Vec<u32>)> {
    match (split, file) {
        (Split::Train, None) => Ok((b.latents.clone(), b.labels.clone())),
        (_, f) => {
            let default = ctx.latents_path(split, b.meta.seed);
            let path = f.unwrap_or(&default);
            let lf = ctx.load_latents(path, b)?;
            if lf.split != split {
                return Err(CliError::Config(format!(
                    "{} holds {} latents",
                    path.display(),
                    lf.split.name()
                )));
            }
            Ok((lf.latents, lf.labels))
        }
    }
}

/// Per-sample conditioning CSV and summary JSON.
pub fn diagnose(
    ctx: &Ctx,
    bundle_path: &Path,
    split: Split,
    latents_file: Option<&Path>,
) -> Result<(PathBuf, PathBuf)> {
    let b = ctx.load_bundle(bundle_path)?;
    let data = ctx.split(split)?;
    let (z, _) = split_latents(ctx, &b, split, latents_file)?;
    let (diags, table) = conditioning_tables(
        &b.hyper,
        &z,
        &data.fields,
        split.name(),
        &ctx.cfg.thresholds,
        &ctx.exec,
    )?;
    let stem = format!("diagnose-{}-s{}", split.name(), b.meta.seed);
    let (csv, json) = (
        ctx.out(format!("{stem}.csv")),
        ctx.out(format!("{stem}.json")),
    );
    report::write_diagnoses(&csv, &b.meta.fingerprint, &diags)?;
    report::write_conditioning(&json, &b.meta.fingerprint, &table)?;
    Ok((csv, json))
}

/// Rows of `z`, or the weights they generate.
pub fn features(b: &ModelBundle, z: &Matrix, repr: Repr) -> Result<Matrix> {
    match repr {
        Repr::Z => Ok(z.clone()),
        Repr::W => {
            let d = b.arch().output_dim();
            let mut out = Vec::with_capacity(z.rows() * d);
            for r in 0..z.rows() {
                out.extend_from_slice(b.hyper.forward(z.row(r))?.as_slice());
            }
            Ok(Matrix::from_vec(z.rows(), d, out)?)
        }
    }
}

fn dataset_name(cfg: &ExperimentConfig) -> String {
    match &cfg.dataset.source {
        Source::Idx { images, .. } if images.contains("mnist") => "mnist".into(),
        Source::Idx { .. } => "idx".into(),
        Source::Synthetic { kind, .. } => format!("synthetic-{kind:?}").to_lowercase(),
        Source::Xyz { .. } => "xyz".into(),
    }
}

/// Trains one classifier per seed on training features and scores the
/// test features.
pub fn classify(
    ctx: &Ctx,
    bundle_path: &Path,
    test_latents: Option<&Path>,
    repr: Repr,
    seeds: usize,
) -> Result<(PathBuf, AccuracyReport)> {
    if seeds == 0 {
        return Err(CliError::Config("need at least one classifier seed".into()));
    }
    let b = ctx.load_bundle(bundle_path)?;
    let (zt, yt) = split_latents(ctx, &b, Split::Test, test_latents)?;
    if b.labels.is_empty() || yt.is_empty() {
        return Err(CliError::Config("classification needs labels".into()));
    }
    let train_x = features(&b, &b.latents, repr)?;
    let test_x = features(&b, &zt, repr)?;
    let mut seed_list = Vec::with_capacity(seeds);
    let mut accs = Vec::with_capacity(seeds);
    for k in 0..seeds as u64 {
        let seed = ctx.cfg.classifier.seed + k;
        let cfg = ClassifierConfig {
            seed,
            ..ctx.cfg.classifier.clone()
        };
        let (model, _) = train_classifier(&train_x, &b.labels, &cfg)?;
        let acc = accuracy(&model, &test_x, &yt)?;
        log::info!(
            "classifier seed {seed}: {} accuracy {:.4}",
            repr.name(),
            acc
        );
        seed_list.push(seed);
        accs.push(acc);
    }
    let (mean, stderr) = AccuracyReport::summarize(&accs);
    let rep = AccuracyReport {
        dataset: dataset_name(&ctx.cfg),
        representation: repr.name().into(),
        seeds: seed_list,
        mean,
        stderr,
        accuracies: accs,
        bundle_seed: b.meta.seed,
        fingerprint: hex(&b.meta.fingerprint),
    };
    let path = ctx.out(format!("accuracy-{}-s{}.json", repr.name(), b.meta.seed));
    report::write_json(&path, &rep)?;
    Ok((path, rep))
}

/// Projects the representations of `split` onto `k` principal components
/// fitted on the same split.
pub fn pca(
    ctx: &Ctx,
    bundle_path: &Path,
    split: Split,
    latents_file: Option<&Path>,
    repr: Repr,
    k: usize,
) -> Result<PathBuf> {
    let b = ctx.load_bundle(bundle_path)?;
    let (z, labels) = split_latents(ctx, &b, split, latents_file)?;
    let x = features(&b, &z, repr)?;
    let proj = pca_fit(&x, k)?;
    let scores = pca_transform(&proj, &x)?;
    log::info!("explained variance ratio {:?}", proj.explained_ratio);
    let path = ctx.out(format!(
        "pca-{}-{}-s{}.csv",
        repr.name(),
        split.name(),
        b.meta.seed
    ));
    report::write_pca(&path, &b.meta.fingerprint, &labels, &scores)?;
    Ok(path)
}

/// Side of the `z = 0` slice dumped for distance fields.
pub const SLICE_RES: usize = 64;

fn slice_grid() -> Vec<f64> {
    let mut g = Vec::with_capacity(SLICE_RES * SLICE_RES * 3);
    let step = |i: usize| -1.0 + (2 * i + 1) as f64 / SLICE_RES as f64;
    for r in 0..SLICE_RES {
        for c in 0..SLICE_RES {
            g.extend_from_slice(&[step(c), step(r), 0.0]);
        }
    }
    g
}

/// One row of the interpolation summary.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpRow {
    pub alpha: f64,
    pub loss_a: f64,
    pub loss_b: f64,
    /// Loss against the closer endpoint, `min(loss_a, loss_b)`.
    pub loss_nearest: f64,
}

#[derive(Debug)]
pub struct Interp {
    pub rows: Vec<InterpRow>,
    pub values: Vec<Vec<f64>>,
    pub csv: PathBuf,
    pub dumps: Vec<PathBuf>,
}

/// Decodes `steps` evenly spaced latents between training samples `a` and
/// `b`. Images are dumped as PGM, distance fields as `z = 0` slice CSVs.
pub fn interp(
    ctx: &Ctx,
    bundle_path: &Path,
    a: usize,
    b_id: usize,
    steps: usize,
) -> Result<Interp> {
    let b = ctx.load_bundle(bundle_path)?;
    let data = ctx.split(Split::Train)?;
    let coords = match data.image_shape {
        Some((h, w)) => hyperinr_core::data::make_grid(h, w),
        None => slice_grid(),
    };
    let path = interpolate_latents(&b, a, b_id, steps, &coords)?;
    let (sa, sb) = (data.fields.sample(a)?, data.fields.sample(b_id)?);
    let fp = b.meta.fingerprint;
    let stem = format!("interp-{a}-{b_id}-s{}", b.meta.seed);
    let mut rows = Vec::with_capacity(steps);
    let mut dumps = Vec::with_capacity(steps);
    for (k, p) in path.iter().enumerate() {
        let la = recon_loss(&b.hyper, &p.latent, &sa)?.loss;
        let lb = recon_loss(&b.hyper, &p.latent, &sb)?.loss;
        rows.push(InterpRow {
            alpha: p.alpha,
            loss_a: la,
            loss_b: lb,
            loss_nearest: la.min(lb),
        });
        let dump = match data.image_shape {
            Some((h, w)) => {
                let f = ctx.out(format!("{stem}-{k}.pgm"));
                write_atomic(&f, &report::pgm_bytes(&fp, w, h, &p.values))?;
                f
            }
            None => {
                let f = ctx.out(format!("{stem}-{k}.csv"));
                let table: Vec<Vec<f64>> = coords
                    .chunks_exact(3)
                    .zip(&p.values)
                    .map(|(q, &u)| vec![q[0], q[1], q[2], u])
                    .collect();
                report::write_table(&f, &fp, &["x", "y", "z", "udf"], &table)?;
                f
            }
        };
        dumps.push(dump);
    }
    let csv = ctx.out(format!("{stem}.csv"));
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.alpha, r.loss_a, r.loss_b, r.loss_nearest])
        .collect();
    report::write_table(
        &csv,
        &fp,
        &["alpha", "loss_a", "loss_b", "loss_nearest"],
        &table,
    )?;
    Ok(Interp {
        rows,
        values: path.into_iter().map(|p| p.values).collect(),
        csv,
        dumps,
    })
}
