//! Experiment configuration: sectioned `key = value` text with includes.
//!
//! ```text
//! include = base.cfg
//! [hyper]
//! latent_dim = 32
//! ```
//!
//! An `include` is spliced in where it appears, resolved relative to the
//! including file; later assignments override earlier ones. Lists are
//! comma separated, optionally in brackets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hyperinr_core::data::SyntheticKind;
use hyperinr_core::diagnostics::{rank_condition_check, RankCheck, Thresholds};
use hyperinr_core::downstream::ClassifierConfig;
use hyperinr_core::train::TrainConfig;
use hyperinr_core::{HyperNetArch, MainNetArch};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Relative dataset paths resolve against this directory when set, else
/// against the directory of the top-level config file.
pub const DATA_ROOT_ENV: &str = "HYPERINR_DATA";

/// Value and the directory of the file that set it.
type Raw = BTreeMap<(String, String), (String, PathBuf)>;

fn parse_into(path: &Path, raw: &mut Raw, stack: &mut Vec<PathBuf>) -> Result<()> {
    let canon = path.canonicalize().map_err(|e| CliError::io(path, e))?;
    if stack.contains(&canon) {
        return Err(CliError::Config(format!(
            "include cycle through {}",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    stack.push(canon);
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut section = String::new();
    for (i, line) in text.lines().enumerate() {
        let at = || format!("{}:{}", path.display(), i + 1);
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| {
                CliError::Config(format!("{}: unterminated section header", at()))
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{}: expected key = value", at())))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "include" {
            parse_into(&dir.join(v), raw, stack)?;
            continue;
        }
        if section.is_empty() {
            return Err(CliError::Config(format!(
                "{}: key {k} outside any section",
                at()
            )));
        }
        raw.insert(
            (section.clone(), k.to_string()),
            (v.to_string(), dir.clone()),
        );
    }
    stack.pop();
    Ok(())
}

/// Typed access that tracks which keys were consumed.
struct Fields {
    raw: Raw,
    used: BTreeSet<(String, String)>,
}

impl Fields {
    fn get(&mut self, section: &str, key: &str) -> Option<String> {
        self.get_with_dir(section, key).map(|(v, _)| v)
    }

    fn get_with_dir(&mut self, section: &str, key: &str) -> Option<(String, PathBuf)> {
        let k = (section.to_string(), key.to_string());
        let v = self.raw.get(&k).cloned();
        if v.is_some() {
            self.used.insert(k);
        }
        v
    }

    /// A path relative to the file that set it.
    fn path(&mut self, section: &str, key: &str) -> Option<PathBuf> {
        self.get_with_dir(section, key).map(|(v, dir)| dir.join(v))
    }

    fn parse<T: std::str::FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T> {
        match self.get(section, key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Config(format!("[{section}] {key}: cannot parse {s:?}"))),
        }
    }

    fn opt<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) if s.eq_ignore_ascii_case("none") => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("[{section}] {key}: cannot parse {s:?}"))),
        }
    }

    fn list<T: std::str::FromStr>(
        &mut self,
        section: &str,
        key: &str,
        default: Vec<T>,
    ) -> Result<Vec<T>> {
        let Some(s) = self.get(section, key) else {
            return Ok(default);
        };
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        inner
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| {
                x.parse()
                    .map_err(|_| CliError::Config(format!("[{section}] {key}: cannot parse {x:?}")))
            })
            .collect()
    }

    fn unused(&self) -> Vec<String> {
        self.raw
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(|(s, k)| format!("[{s}] {k}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// IDX image/label files. Without separate test files the test split
    /// is taken from the same files after the training images.
    Idx {
        images: String,
        labels: String,
        test_images: Option<String>,
        test_labels: Option<String>,
    },
    Synthetic {
        kind: SyntheticKind,
        classes: usize,
        size: usize,
        points: usize,
    },
    /// A manifest with one `train|test <label> <file.xyz>` line per shape.
    Xyz { manifest: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub source: Source,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Distance queries per shape; unused for images.
    pub queries: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_latent: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub arch: HyperNetArch,
    pub train: TrainConfig,
    pub infer: InferConfig,
    pub thresholds: Thresholds,
    pub classifier: ClassifierConfig,
    pub output_dir: PathBuf,
    /// Dataset file names as written in the config, resolved.
    pub data_paths: BTreeMap<String, PathBuf>,
}

fn synthetic_kind(s: &str) -> Result<SyntheticKind> {
    match s {
        "blobs" => Ok(SyntheticKind::Blobs),
        "rings" => Ok(SyntheticKind::Rings),
        "superquadrics" => Ok(SyntheticKind::Superquadrics),
        other => Err(CliError::Config(format!(
            "unknown synthetic kind {other:?}"
        ))),
    }
}

fn kind_name(k: SyntheticKind) -> &'static str {
    match k {
        SyntheticKind::Blobs => "blobs",
        SyntheticKind::Rings => "rings",
        SyntheticKind::Superquadrics => "superquadrics",
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut raw = Raw::new();
        parse_into(path, &mut raw, &mut Vec::new())?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_raw(raw, &base)
    }

    /// Parses config text; relative paths resolve against the working
    /// directory.
    pub fn parse_str(text: &str) -> Result<Self> {
        let dir = tempfile::tempdir().map_err(|e| CliError::io(Path::new("."), e))?;
        let file = dir.path().join("inline.cfg");
        std::fs::write(&file, text).map_err(|e| CliError::io(&file, e))?;
        let mut raw = Raw::new();
        parse_into(&file, &mut raw, &mut Vec::new())?;
        for (_, dir) in raw.values_mut() {
            *dir = PathBuf::new();
        }
        Self::from_raw(raw, Path::new(""))
    }

    fn from_raw(raw: Raw, base: &Path) -> Result<Self> {
        let mut f = Fields {
            raw,
            used: BTreeSet::new(),
        };
        let d = "dataset";
        let source_name = f.get(d, "source").unwrap_or_else(|| "mnist".into());
        let source = match source_name.as_str() {
            "mnist" | "idx" => {
                let (di, dl) = if source_name == "mnist" {
                    (
                        "mnist/mnist5k-images-idx3-ubyte",
                        "mnist/mnist5k-labels-idx1-ubyte",
                    )
                } else {
                    ("", "")
                };
                let images = f.get(d, "images").unwrap_or_else(|| di.into());
                let labels = f.get(d, "labels").unwrap_or_else(|| dl.into());
                if images.is_empty() || labels.is_empty() {
                    return Err(CliError::Config(
                        "idx source needs images and labels".into(),
                    ));
                }
                Source::Idx {
                    images,
                    labels,
                    test_images: f.get(d, "test_images"),
                    test_labels: f.get(d, "test_labels"),
                }
            }
            "synthetic" => {
                let kind = synthetic_kind(&f.get(d, "kind").unwrap_or_else(|| "blobs".into()))?;
                Source::Synthetic {
                    kind,
                    classes: f.parse(d, "classes", 3)?,
                    size: f.parse(d, "size", 16)?,
                    points: f.parse(d, "points", 2048)?,
                }
            }
            "xyz" => Source::Xyz {
                manifest: f
                    .get(d, "manifest")
                    .ok_or_else(|| CliError::Config("xyz source needs a manifest".into()))?,
            },
            other => {
                return Err(CliError::Config(format!(
                    "unknown dataset source {other:?}"
                )))
            }
        };
        let dataset = DatasetConfig {
            source,
            train_per_class: f.parse(d, "train_per_class", 200)?,
            test_per_class: f.parse(d, "test_per_class", 50)?,
            queries: f.parse(d, "queries", hyperinr_core::data::DEFAULT_QUERIES)?,
            seed: f.parse(d, "seed", 0)?,
        };

        let (input_dim, output_dim) = match dataset.source {
            Source::Synthetic {
                kind: SyntheticKind::Superquadrics,
                ..
            }
            | Source::Xyz { .. } => (3, 1),
            _ => (2, 1),
        };
        let main = MainNetArch::new(
            input_dim,
            f.list("main", "hidden", vec![64, 64, 64])?,
            output_dim,
            f.parse("main", "omega0", hyperinr_core::siren::DEFAULT_OMEGA0)?,
        )?;
        let arch = HyperNetArch::new(
            f.parse("hyper", "latent_dim", 20)?,
            f.list("hyper", "trunk", vec![256, 256])?,
            f.parse("hyper", "heads", 0)?,
            main,
        )?;

        let t = "train";
        let train = TrainConfig {
            epochs: f.parse(t, "epochs", 500)?,
            batch_size: f.parse(t, "batch_size", 1024)?,
            lr_hyper: f.parse(t, "lr_hyper", 1e-4)?,
            lr_latent: f.parse(t, "lr_latent", 1e-3)?,
            query_batch: f.opt(t, "query_batch")?,
            seed: f.parse(t, "seed", 1)?,
            target_loss: f.opt(t, "target_loss")?,
        };
        train.validate()?;

        let infer = InferConfig {
            epochs: f.parse("infer", "epochs", train.epochs)?,
            batch_size: f.parse("infer", "batch_size", train.batch_size)?,
            lr_latent: f.parse("infer", "lr_latent", train.lr_latent)?,
            seed: f.parse("infer", "seed", train.seed)?,
        };

        let defaults = Thresholds::default();
        let thresholds = Thresholds {
            kappa: f.list("diagnostics", "kappa", defaults.kappa)?,
            sigma: f.list("diagnostics", "sigma", defaults.sigma)?,
        };

        let c = ClassifierConfig::default();
        let classifier = ClassifierConfig {
            hidden: f.list("classifier", "hidden", c.hidden)?,
            epochs: f.parse("classifier", "epochs", c.epochs)?,
            batch_size: f.parse("classifier", "batch_size", c.batch_size)?,
            lr: f.parse("classifier", "lr", c.lr)?,
            seed: f.parse("classifier", "seed", 1)?,
        };

        let output_dir = f.path("output", "dir").unwrap_or_else(|| base.join("out"));
        let root = std::env::var_os(DATA_ROOT_ENV)
            .map(PathBuf::from)
            .or_else(|| f.path(d, "root"));
        let mut data_paths = BTreeMap::new();
        for key in ["images", "labels", "test_images", "test_labels", "manifest"] {
            if let Some((v, dir)) = f.get_with_dir(d, key) {
                let resolved = root.as_deref().unwrap_or(&dir).join(&v);
                data_paths.insert(v, resolved);
            }
        }
        if source_name == "mnist" {
            for key in [
                "mnist/mnist5k-images-idx3-ubyte",
                "mnist/mnist5k-labels-idx1-ubyte",
            ] {
                data_paths
                    .entry(key.to_string())
                    .or_insert_with(|| root.as_deref().unwrap_or(base).join(key));
            }
        }

        let unused = f.unused();
        if !unused.is_empty() {
            return Err(CliError::Config(format!(
                "unknown keys: {}",
                unused.join(", ")
            )));
        }
        if dataset.train_per_class == 0 {
            return Err(CliError::Config("train_per_class must be positive".into()));
        }
        if classifier.epochs == 0 || classifier.batch_size == 0 {
            return Err(CliError::Config(
                "classifier epochs and batch size must be positive".into(),
            ));
        }
        Ok(Self {
            dataset,
            arch,
            train,
            infer,
            thresholds,
            classifier,
            output_dir,
            data_paths,
        })
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        self.data_paths
            .get(p)
            .cloned()
            .unwrap_or_else(|| PathBuf::from(p))
    }

    /// Settings that determine a trained bundle, one `key=value` per line.
    /// The training seed is left out; it travels with the bundle.
    pub fn normalized(&self) -> String {
        let mut s = String::new();
        let d = &self.dataset;
        match &d.source {
            Source::Idx {
                images,
                labels,
                test_images,
                test_labels,
            } => {
                let _ = writeln!(
                    s,
                    "dataset.source=idx\ndataset.images={images}\ndataset.labels={labels}"
                );
                let _ = writeln!(
                    s,
                    "dataset.test_images={test_images:?}\ndataset.test_labels={test_labels:?}"
                );
            }
            Source::Synthetic {
                kind,
                classes,
                size,
                points,
            } => {
                let _ = writeln!(
                    s,
                    "dataset.source=synthetic\ndataset.kind={}\ndataset.classes={classes}\ndataset.size={size}\ndataset.points={points}",
                    kind_name(*kind)
                );
            }
            Source::Xyz { manifest } => {
                let _ = writeln!(s, "dataset.source=xyz\ndataset.manifest={manifest}");
            }
        }
        let _ = writeln!(
            s,
            "dataset.train_per_class={}\ndataset.test_per_class={}\ndataset.queries={}\ndataset.seed={}",
            d.train_per_class, d.test_per_class, d.queries, d.seed
        );
        let a = &self.arch;
        let _ = writeln!(
            s,
            "main.input_dim={}\nmain.hidden={:?}\nmain.output_dim={}\nmain.omega0={:e}",
            a.main.input_dim, a.main.hidden, a.main.output_dim, a.main.omega0
        );
        let _ = writeln!(
            s,
            "hyper.latent_dim={}\nhyper.trunk={:?}\nhyper.heads={}",
            a.latent_dim, a.trunk, a.heads
        );
        let t = &self.train;
        let _ = writeln!(
            s,
            "train.epochs={}\ntrain.batch_size={}\ntrain.lr_hyper={:e}\ntrain.lr_latent={:e}\ntrain.query_batch={:?}\ntrain.target_loss={:?}",
            t.epochs, t.batch_size, t.lr_hyper, t.lr_latent, t.query_batch, t.target_loss
        );
        s
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        Sha256::digest(self.normalized().as_bytes()).into()
    }

    /// Points per sample as the model sees them during training.
    pub fn points_per_sample(&self) -> Result<usize> {
        Ok(match &self.dataset.source {
            Source::Idx { images, .. } => {
                let path = self.resolve(images);
                let mut head = [0u8; 16];
                let mut file = std::fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
                std::io::Read::read_exact(&mut file, &mut head)
                    .map_err(|e| CliError::io(&path, e))?;
                let dim = |i: usize| {
                    u32::from_be_bytes(head[i..i + 4].try_into().expect("4 bytes")) as usize
                };
                dim(8) * dim(12)
            }
            Source::Synthetic {
                kind: SyntheticKind::Superquadrics,
                ..
            }
            | Source::Xyz { .. } => self
                .train
                .query_batch
                .unwrap_or(self.dataset.queries)
                .min(self.dataset.queries),
            Source::Synthetic { size, .. } => size * size,
        })
    }

    /// Checks that only need the config and dataset headers.
    pub fn rank_check(&self) -> Result<RankCheck> {
        let n = self.points_per_sample()?;
        Ok(rank_condition_check(
            n,
            self.arch.main.output_dim,
            self.arch.latent_dim,
        ))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
