//! Builds train/test splits from a config.

use std::path::Path;

use hyperinr_core::data::{
    gen_synthetic, parse_idx_images, parse_idx_labels, udf_dataset, ImageDataset, PointCloud,
    Synthetic, SyntheticSpec,
};
use hyperinr_core::FieldDataset;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Source};
use crate::error::{CliError, Result};
use crate::fsutil::{self, read};
use crate::udfcache;
use crate::xyz::parse_xyz;

/// Test shapes draw queries from a different stream than training shapes.
const TEST_QUERY_SALT: u64 = 0x7465_7374;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

/// One split ready for training, plus the image shape when it is 2D.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub fields: FieldDataset,
    pub image_shape: Option<(usize, usize)>,
}

fn load_idx(cfg: &ExperimentConfig, images: &str, labels: &str) -> Result<ImageDataset> {
    let (ip, lp) = (cfg.resolve(images), cfg.resolve(labels));
    let (px, _, h, w) = parse_idx_images(&read(&ip)?).map_err(|e| CliError::format(&ip, e))?;
    let y = parse_idx_labels(&read(&lp)?).map_err(|e| CliError::format(&lp, e))?;
    Ok(ImageDataset::new(px, y, h, w)?)
}

fn images(ds: ImageDataset) -> Result<Loaded> {
    let shape = (ds.height(), ds.width());
    Ok(Loaded {
        fields: ds.to_fields()?,
        image_shape: Some(shape),
    })
}

/// Per class, drops the first `skip` items and keeps the next `take`.
fn per_class<T: Clone>(
    items: &[T],
    labels: &[u32],
    skip: usize,
    take: usize,
) -> (Vec<T>, Vec<u32>) {
    let mut seen = std::collections::HashMap::new();
    let mut out = (Vec::new(), Vec::new());
    for (x, &y) in items.iter().zip(labels) {
        let k = seen.entry(y).or_insert(0usize);
        if *k >= skip && *k < skip + take {
            out.0.push(x.clone());
            out.1.push(y);
        }
        *k += 1;
    }
    out
}

fn cache_key(cfg: &ExperimentConfig, split: Split) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(
        cfg.normalized()
            .lines()
            .filter(|l| l.starts_with("dataset."))
            .collect::<Vec<_>>()
            .join("\n"),
    );
    h.update(split.name());
    h.finalize().into()
}

pub fn udf_cache_path(cfg: &ExperimentConfig, split: Split) -> std::path::PathBuf {
    cfg.output_dir.join(format!("udf-{}.hudf", split.name()))
}

fn clouds(
    cfg: &ExperimentConfig,
    split: Split,
    clouds: Vec<PointCloud>,
    labels: Vec<u32>,
) -> Result<Loaded> {
    let cache = udf_cache_path(cfg, split);
    let key = cache_key(cfg, split);
    if let Ok(bytes) = std::fs::read(&cache) {
        match udfcache::decode(&bytes) {
            Ok((k, ds)) if k == key => {
                log::info!("using cached distance samples {}", cache.display());
                return Ok(Loaded {
                    fields: ds,
                    image_shape: None,
                });
            }
            Ok(_) => log::warn!("ignoring stale cache {}", cache.display()),
            Err(e) => log::warn!("ignoring unreadable cache {}: {e}", cache.display()),
        }
    }
    let seed = match split {
        Split::Train => cfg.dataset.seed,
        Split::Test => cfg.dataset.seed ^ TEST_QUERY_SALT,
    };
    Ok(Loaded {
        fields: udf_dataset(&clouds, labels, cfg.dataset.queries, seed)?,
        image_shape: None,
    })
}

/// Loads `split`. `None` when the config asks for no test samples.
pub fn load_split(cfg: &ExperimentConfig, split: Split) -> Result<Option<Loaded>> {
    let d = &cfg.dataset;
    let (skip, take) = match split {
        Split::Train => (0, d.train_per_class),
        Split::Test => (d.train_per_class, d.test_per_class),
    };
    if take == 0 {
        return Ok(None);
    }
    let loaded = match &d.source {
        Source::Idx {
            images: im,
            labels,
            test_images,
            test_labels,
        } => match (split, test_images, test_labels) {
            (Split::Test, Some(ti), Some(tl)) => {
                images(load_idx(cfg, ti, tl)?.take_per_class(0, take)?)?
            }
            (Split::Test, None, None) | (Split::Train, _, _) => {
                images(load_idx(cfg, im, labels)?.take_per_class(skip, take)?)?
            }
            _ => {
                return Err(CliError::Config(
                    "test_images and test_labels go together".into(),
                ))
            }
        },
        Source::Synthetic {
            kind,
            classes,
            size,
            points,
        } => {
            let spec = SyntheticSpec {
                kind: *kind,
                classes: *classes,
                per_class: d.train_per_class + d.test_per_class,
                size: *size,
                points: *points,
                seed: d.seed,
            };
            match gen_synthetic(&spec)? {
                Synthetic::Images(ds) => images(ds.take_per_class(skip, take)?)?,
                Synthetic::Clouds { clouds: c, labels } => {
                    let (c, y) = per_class(&c, &labels, skip, take);
                    clouds(cfg, split, c, y)?
                }
            }
        }
        Source::Xyz { manifest } => {
            let path = cfg.resolve(manifest);
            let text = String::from_utf8(read(&path)?)
                .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
            let dir = path.parent().unwrap_or(Path::new("."));
            let (mut c, mut y) = (Vec::new(), Vec::new());
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let bad = || {
                    CliError::Config(format!(
                        "{}:{}: expected `train|test <label> <file>`",
                        path.display(),
                        i + 1
                    ))
                };
                let mut it = line.split_whitespace();
                let (Some(s), Some(label), Some(file), None) =
                    (it.next(), it.next(), it.next(), it.next())
                else {
                    return Err(bad());
                };
                let s: Split = s.parse().map_err(|_| bad())?;
                let label: u32 = label.parse().map_err(|_| bad())?;
                if s != split {
                    continue;
                }
                let fp = dir.join(file);
                let text = String::from_utf8(read(&fp)?)
                    .map_err(|_| CliError::Config(format!("{} is not UTF-8", fp.display())))?;
                let pts = parse_xyz(&text).map_err(|e| CliError::format(&fp, e))?;
                c.push(PointCloud::fit(&pts).map_err(|e| CliError::format(&fp, e))?);
                y.push(label);
            }
            if c.is_empty() {
                return Ok(None);
            }
            clouds(cfg, split, c, y)?
        }
    };
    Ok(Some(loaded))
}

/// Samples the distance fields of both splits and writes them to the cache.
pub fn prepare_udf(cfg: &ExperimentConfig) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    for split in [Split::Train, Split::Test] {
        let Some(loaded) = load_split(cfg, split)? else {
            continue;
        };
        if loaded.image_shape.is_some() {
            return Err(CliError::Config(
                "prepare-udf needs a point-cloud dataset".into(),
            ));
        }
        let path = udf_cache_path(cfg, split);
        fsutil::write_atomic(
            &path,
            &udfcache::encode(&cache_key(cfg, split), &loaded.fields),
        )?;
        written.push(path);
    }
    Ok(written)
}
