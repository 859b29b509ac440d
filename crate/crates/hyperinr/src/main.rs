use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperinr::commands::{self, Ctx, Repr};
use hyperinr::config::{hex, ExperimentConfig};
use hyperinr::dataset::{prepare_udf, Split};
use hyperinr::{CliError, Result};

#[derive(Parser)]
#[command(
    name = "hyperinr",
    version,
    about = "Hypernetwork-generated SIREN representations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config file.
    #[arg(long, short)]
    config: PathBuf,
    /// Worker threads; results are bit-identical for any count.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Accept artifacts whose config fingerprint differs.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BundleArg {
    /// Bundle file; defaults to the one of `--seed` in the output directory.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Training seed used to locate the default bundle.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a config and print its fingerprint and rank check.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Jointly train the hypernetwork and training latents.
    Train {
        #[command(flatten)]
        common: Common,
        /// One seed (`3`) or an inclusive range (`1..5`).
        #[arg(long)]
        seed: Option<String>,
    },
    /// Fit latents for a split with the hypernetwork frozen.
    Infer {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Start training samples from their trained latents.
        #[arg(long)]
        warm: bool,
    },
    /// Gradient and Hessian conditioning report for a split.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long, default_value = "train")]
        split: Split,
        /// Latent file; defaults to the bundle's (train) or inferred (test).
        #[arg(long)]
        latents: Option<PathBuf>,
    },
    /// Train classifiers on training representations, score test ones.
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long, default_value = "z")]
        repr: Repr,
        /// Number of classifier seeds.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        test_latents: Option<PathBuf>,
    },
    /// Principal component scores of a split's representations.
    Pca {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value = "z")]
        repr: Repr,
        #[arg(long, default_value = "train")]
        split: Split,
        #[arg(long)]
        latents: Option<PathBuf>,
    },
    /// Decode a straight latent path between two training samples.
    Interp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bundle: BundleArg,
        #[arg(long)]
        a: usize,
        #[arg(long)]
        b: usize,
        #[arg(long, default_value_t = 5)]
        steps: usize,
    },
    /// Sample and cache distance fields for point-cloud datasets.
    PrepareUdf {
        #[command(flatten)]
        common: Common,
    },
}

fn seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Config(format!("bad seed spec {spec:?}; use N or A..B"));
    match spec.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b
                .trim_start_matches('=')
                .trim()
                .parse()
                .map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![spec.trim().parse().map_err(|_| bad())?]),
    }
}

fn ctx(c: &Common) -> Result<Ctx> {
    let cfg = ExperimentConfig::load(&c.config)?;
    Ok(Ctx::new(cfg, c.threads, c.force))
}

fn bundle_path(ctx: &Ctx, b: &BundleArg) -> PathBuf {
    b.bundle
        .clone()
        .unwrap_or_else(|| ctx.bundle_path(b.seed.unwrap_or(ctx.cfg.train.seed)))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Check { common } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let rank = cfg.rank_check()?;
            let mut text = format!("fingerprint {}\n", hex(&cfg.fingerprint()));
            text += &format!(
                "rank condition n*c >= l: {} ({}*{} vs {})\n",
                if rank.satisfied {
                    "satisfied"
                } else {
                    "VIOLATED"
                },
                rank.n,
                rank.c,
                rank.l
            );
            if let Some(w) = rank.warning() {
                log::warn!("{w}");
            }
            text += &cfg.normalized();
            // A closed pipe (`| head`) is not an error.
            let _ = std::io::Write::write_all(&mut std::io::stdout().lock(), text.as_bytes());
        }
        Cmd::Train { common, seed } => {
            let ctx = ctx(&common)?;
            let list = match seed {
                Some(s) => seeds(&s)?,
                None => vec![ctx.cfg.train.seed],
            };
            for s in list {
                let t = commands::train(&ctx, s)?;
                log::info!(
                    "wrote {} and {}",
                    t.bundle_path.display(),
                    t.log_path.display()
                );
            }
        }
        Cmd::Infer {
            common,
            bundle,
            split,
            warm,
        } => {
            let ctx = ctx(&common)?;
            let r = commands::infer(&ctx, &bundle_path(&ctx, &bundle), split, warm)?;
            log::info!("wrote {}", r.path.display());
        }
        Cmd::Diagnose {
            common,
            bundle,
            split,
            latents,
        } => {
            let ctx = ctx(&common)?;
            let (csv, json) =
                commands::diagnose(&ctx, &bundle_path(&ctx, &bundle), split, latents.as_deref())?;
            log::info!("wrote {} and {}", csv.display(), json.display());
        }
        Cmd::Classify {
            common,
            bundle,
            repr,
            seeds,
            test_latents,
        } => {
            let ctx = ctx(&common)?;
            let (path, r) = commands::classify(
                &ctx,
                &bundle_path(&ctx, &bundle),
                test_latents.as_deref(),
                repr,
                seeds,
            )?;
            log::info!(
                "accuracy {:.4} ± {:.4}; wrote {}",
                r.mean,
                r.stderr,
                path.display()
            );
        }
        Cmd::Pca {
            common,
            bundle,
            k,
            repr,
            split,
            latents,
        } => {
            let ctx = ctx(&common)?;
            let path = commands::pca(
                &ctx,
                &bundle_path(&ctx, &bundle),
                split,
                latents.as_deref(),
                repr,
                k,
            )?;
            log::info!("wrote {}", path.display());
        }
        Cmd::Interp {
            common,
            bundle,
            a,
            b,
            steps,
        } => {
            let ctx = ctx(&common)?;
            let r = commands::interp(&ctx, &bundle_path(&ctx, &bundle), a, b, steps)?;
            log::info!("wrote {} and {} dumps", r.csv.display(), r.dumps.len());
        }
        Cmd::PrepareUdf { common } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            for p in prepare_udf(&cfg)? {
                log::info!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
