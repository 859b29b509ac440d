//! Commands end to end on small synthetic data, through the library and
//! through the binary.

use std::path::{Path, PathBuf};
use std::process::Command;

use hyperinr::commands::{self, Ctx, Repr};
use hyperinr::config::ExperimentConfig;
use hyperinr::dataset::{load_split, Split};
use hyperinr::report::AccuracyReport;
use hyperinr::CliError;
use hyperinr_core::train::sample_losses;
use hyperinr_core::Sequential;

const SMOKE: &str = "\
[dataset]
source = synthetic
kind = blobs
classes = 3
size = 8
train_per_class = 4
test_per_class = 2
seed = 5

[main]
hidden = 12, 12

[hyper]
latent_dim = 4
trunk = 24

[train]
epochs = 40
batch_size = 6
lr_hyper = 1e-4
lr_latent = 1e-3

[infer]
epochs = 80

[classifier]
hidden = 8
epochs = 20
batch_size = 6

[output]
dir = out
";

fn setup(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("smoke.cfg");
    std::fs::write(&cfg, format!("{SMOKE}{extra}")).unwrap();
    (dir, cfg)
}

fn ctx(cfg: &Path, threads: usize) -> Ctx {
    Ctx::new(ExperimentConfig::load(cfg).unwrap(), threads, false)
}

fn mean_losses(
    ctx: &Ctx,
    split: Split,
    z: &hyperinr_core::Matrix,
    b: &hyperinr_core::ModelBundle,
) -> Vec<f64> {
    let data = load_split(&ctx.cfg, split).unwrap().unwrap();
    sample_losses(&b.hyper, z.as_slice(), &data.fields, 64, &Sequential).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .map(|it| {
            it.map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

#[test]
fn train_infer_and_downstream() {
    let (_dir, cfg) = setup("");
    let ctx = ctx(&cfg, 1);
    let t = commands::train(&ctx, 1).unwrap();
    let log = std::fs::read_to_string(&t.log_path).unwrap();
    assert!(log.starts_with("# fingerprint "));
    assert_eq!(
        log.lines().nth(1),
        Some("epoch,mean_loss,mean_mse,mean_grad_norm,wall_secs")
    );
    assert_eq!(log.lines().count(), 2 + 40);

    let train_losses = mean_losses(&ctx, Split::Train, &t.bundle.latents, &t.bundle);

    // Re-embedding the training set from scratch lands near the trained fit.
    let again = commands::infer(&ctx, &t.bundle_path, Split::Train, false).unwrap();
    let re = mean_losses(&ctx, Split::Train, &again.file.latents, &t.bundle);
    let (a, b) = (train_losses.iter().sum::<f64>(), re.iter().sum::<f64>());
    assert!(
        b <= 2.0 * a && a <= 2.0 * b,
        "trained {a} vs re-inferred {b}"
    );

    // Warm starts never get worse.
    let warm = commands::infer(&ctx, &t.bundle_path, Split::Train, true).unwrap();
    for (w, t0) in mean_losses(&ctx, Split::Train, &warm.file.latents, &t.bundle)
        .iter()
        .zip(&train_losses)
    {
        assert!(w <= t0, "{w} > {t0}");
    }

    let test = commands::infer(&ctx, &t.bundle_path, Split::Test, false).unwrap();
    assert_eq!(test.file.latents.rows(), 6);
    assert_eq!(test.file.labels.len(), 6);

    let (csv, json) = commands::diagnose(&ctx, &t.bundle_path, Split::Test, None).unwrap();
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 2 + 6);
    assert_eq!(
        rows.lines().nth(1),
        Some("sample_id,sigma_min,sigma_max,kappa,grad_norm,loss")
    );
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    let kappas: Vec<f64> = summary["kappa_above"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["threshold"].as_f64().unwrap())
        .collect();
    let sigmas: Vec<f64> = summary["sigma_below"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["threshold"].as_f64().unwrap())
        .collect();
    assert!(kappas.contains(&1e3) && kappas.contains(&1e4));
    assert!(sigmas.contains(&1e-5) && sigmas.contains(&1e-6));
    let before = (std::fs::read(&csv).unwrap(), std::fs::read(&json).unwrap());
    commands::diagnose(&ctx, &t.bundle_path, Split::Test, None).unwrap();
    assert_eq!(
        before,
        (std::fs::read(&csv).unwrap(), std::fs::read(&json).unwrap())
    );

    let (path, rep) = commands::classify(&ctx, &t.bundle_path, None, Repr::Z, 5).unwrap();
    let parsed: AccuracyReport = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(parsed, rep);
    assert_eq!(rep.seeds.len(), 5);
    assert_eq!(rep.representation, "z");
    assert_eq!(
        AccuracyReport::summarize(&rep.accuracies),
        (rep.mean, rep.stderr)
    );
    let (_, w) = commands::classify(&ctx, &t.bundle_path, None, Repr::W, 1).unwrap();
    assert_eq!((w.representation.as_str(), w.stderr), ("w", 0.0));

    let pca = std::fs::read_to_string(
        commands::pca(&ctx, &t.bundle_path, Split::Train, None, Repr::Z, 3).unwrap(),
    )
    .unwrap();
    assert_eq!(pca.lines().nth(1), Some("sample_id,label,pc1,pc2,pc3"));
    assert_eq!(pca.lines().count(), 2 + 12);

    let it = commands::interp(&ctx, &t.bundle_path, 0, 11, 5).unwrap();
    let alphas: Vec<f64> = it.rows.iter().map(|r| r.alpha).collect();
    assert_eq!(alphas, [0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(it.dumps.len(), 5);
    let pgm = std::fs::read(&it.dumps[2]).unwrap();
    assert!(pgm.starts_with(b"P5\n# fingerprint "));
    let header = pgm.len() - 64;
    assert!(String::from_utf8_lossy(&pgm[..header]).ends_with("8 8\n255\n"));
    for r in &it.rows {
        assert_eq!(r.loss_nearest, r.loss_a.min(r.loss_b));
    }
}

#[test]
fn test_inference_is_stable_across_start_seeds() {
    let (_dir, cfg) = setup("");
    let c = ctx(&cfg, 1);
    let t = commands::train(&c, 2).unwrap();
    let mut runs = Vec::new();
    for seed in [11, 12] {
        let mut cfg2 = c.cfg.clone();
        cfg2.infer.seed = seed;
        let c2 = Ctx::new(cfg2, 1, false);
        let inf = commands::infer(&c2, &t.bundle_path, Split::Test, false).unwrap();
        runs.push(mean_losses(&c2, Split::Test, &inf.file.latents, &t.bundle));
    }
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        assert!(a / b < 10.0 && b / a < 10.0, "{a} vs {b}");
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let (_d1, cfg) = setup("");
    let one = commands::train(&ctx(&cfg, 1), 3).unwrap();
    let (_d2, cfg) = setup("");
    let four = commands::train(&ctx(&cfg, 4), 3).unwrap();
    assert_eq!(
        std::fs::read(one.bundle_path).unwrap(),
        std::fs::read(four.bundle_path).unwrap()
    );
}

#[test]
fn mismatched_artifacts_are_refused() {
    let (dir, cfg) = setup("");
    let c = ctx(&cfg, 1);
    let t = commands::train(&c, 1).unwrap();

    // Same architecture, different training settings: fingerprint check.
    let other = dir.path().join("other.cfg");
    std::fs::write(&other, "include = smoke.cfg\n[train]\nlr_hyper = 3e-4\n").unwrap();
    let c2 = Ctx::new(ExperimentConfig::load(&other).unwrap(), 1, false);
    let e = commands::pca(&c2, &t.bundle_path, Split::Train, None, Repr::Z, 2).unwrap_err();
    assert!(matches!(e, CliError::Fingerprint { .. }), "{e}");
    let forced = Ctx { force: true, ..c2 };
    commands::pca(&forced, &t.bundle_path, Split::Train, None, Repr::Z, 2).unwrap();

    // Different architecture: format error even with --force.
    std::fs::write(&other, "include = smoke.cfg\n[hyper]\nlatent_dim = 5\n").unwrap();
    let c3 = Ctx::new(ExperimentConfig::load(&other).unwrap(), 1, true);
    let e = commands::diagnose(&c3, &t.bundle_path, Split::Train, None).unwrap_err();
    assert!(matches!(e, CliError::Format { .. }), "{e}");
    assert_eq!(e.exit_code(), 2);
}

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hyperinr"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn binary_seed_ranges_and_exit_codes() {
    let (dir, cfg) = setup("");
    let cfg = cfg.to_str().unwrap();
    let (code, err) = run(&["train", "-c", cfg, "--seed", "1..3"]);
    assert_eq!(code, 0, "{err}");
    let out = dir.path().join("out");
    let names = files(&out);
    for s in 1..=3 {
        assert!(names.contains(&format!("bundle-s{s}.hinr")), "{names:?}");
        assert!(names.contains(&format!("train-log-s{s}.csv")), "{names:?}");
    }
    assert_eq!(run(&["pca", "-c", cfg, "--seed", "2", "--k", "2"]).0, 0);
    assert!(files(&out).contains(&"pca-z-train-s2.csv".to_string()));

    // Missing dataset: config/IO failure and nothing written.
    let bad = dir.path().join("missing.cfg");
    std::fs::write(
        &bad,
        "[dataset]\nsource = idx\nimages = none.idx\nlabels = none.idx\n[output]\ndir = never\n",
    )
    .unwrap();
    let (code, err) = run(&["train", "-c", bad.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(!dir.path().join("never").exists());

    // Diverging training: numeric failure and no bundle.
    let hot = dir.path().join("hot.cfg");
    std::fs::write(
        &hot,
        "include = smoke.cfg\n[train]\nlr_hyper = 1e3\nlr_latent = 1e3\n[output]\ndir = hot\n",
    )
    .unwrap();
    let (code, err) = run(&["train", "-c", hot.to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
    assert!(files(&dir.path().join("hot"))
        .iter()
        .all(|f| !f.ends_with(".hinr")));

    let (code, _) = run(&["train", "-c", cfg, "--seed", "3..1"]);
    assert_eq!(code, 2);
}
