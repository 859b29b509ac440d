//! CSV, JSON and PGM artifacts. Every artifact carries the config
//! fingerprint: CSV and PGM in a leading `#` comment, JSON as a field.

use std::path::Path;

use hyperinr_core::diagnostics::{ConditioningTable, SampleDiagnosis};
use hyperinr_core::train::TrainLog;
use serde::Serialize;

use crate::config::hex;
use crate::error::{CliError, Result};
use crate::fsutil::write_atomic;

fn csv_bytes(
    fingerprint: &[u8; 32],
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<Vec<u8>> {
    let mut buf = format!("# fingerprint {}\n", hex(fingerprint)).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(&r).map_err(err)?;
        }
        w.flush()
            .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    }
    Ok(buf)
}

/// Shortest representation that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_train_log(path: &Path, fingerprint: &[u8; 32], log: &TrainLog) -> Result<()> {
    let header = [
        "epoch",
        "mean_loss",
        "mean_mse",
        "mean_grad_norm",
        "wall_secs",
    ]
    .map(String::from);
    let rows = log.epochs.iter().map(|e| {
        vec![
            e.epoch.to_string(),
            num(e.mean_loss),
            num(e.mean_mse),
            num(e.mean_grad_norm),
            format!("{:.3}", e.wall_secs),
        ]
    });
    write_atomic(path, &csv_bytes(fingerprint, &header, rows)?)
}

pub fn write_diagnoses(
    path: &Path,
    fingerprint: &[u8; 32],
    diags: &[SampleDiagnosis],
) -> Result<()> {
    let header = [
        "sample_id",
        "sigma_min",
        "sigma_max",
        "kappa",
        "grad_norm",
        "loss",
    ]
    .map(String::from);
    let rows = diags.iter().map(|d| {
        let (smin, smax, k) = match &d.hessian {
            Ok(h) => (num(h.sigma_min), num(h.sigma_max), num(h.kappa)),
            Err(_) => ("nan".into(), "nan".into(), "nan".into()),
        };
        vec![
            d.sample_id.to_string(),
            smin,
            smax,
            k,
            num(d.grad_norm),
            num(d.loss),
        ]
    });
    write_atomic(path, &csv_bytes(fingerprint, &header, rows)?)
}

#[derive(Debug, Serialize)]
struct ThresholdRow {
    threshold: f64,
    percent: f64,
}

/// Non-finite floats are written as strings ("inf", "NaN").
#[derive(Debug, Serialize)]
#[serde(untagged)]
enum Float {
    Finite(f64),
    Special(String),
}

impl From<f64> for Float {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Float::Finite(x)
        } else {
            Float::Special(x.to_string())
        }
    }
}

#[derive(Debug, Serialize)]
struct ConditioningJson {
    fingerprint: String,
    split: String,
    samples: usize,
    evaluated: usize,
    failed: usize,
    mean_loss: Float,
    mean_grad_norm: Float,
    max_kappa: Float,
    min_sigma: Float,
    kappa_above: Vec<ThresholdRow>,
    sigma_below: Vec<ThresholdRow>,
}

pub fn write_conditioning(
    path: &Path,
    fingerprint: &[u8; 32],
    table: &ConditioningTable,
) -> Result<()> {
    let rows = |v: &[(f64, f64)]| {
        v.iter()
            .map(|&(threshold, percent)| ThresholdRow { threshold, percent })
            .collect()
    };
    let j = ConditioningJson {
        fingerprint: hex(fingerprint),
        split: table.split.clone(),
        samples: table.evaluated + table.failed,
        evaluated: table.evaluated,
        failed: table.failed,
        mean_loss: table.mean_loss.into(),
        mean_grad_norm: table.mean_grad_norm.into(),
        max_kappa: table.max_kappa.into(),
        min_sigma: table.min_sigma.into(),
        kappa_above: rows(&table.kappa_above),
        sigma_below: rows(&table.sigma_below),
    };
    write_json(path, &j)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct AccuracyReport {
    pub dataset: String,
    pub representation: String,
    pub seeds: Vec<u64>,
    pub mean: f64,
    pub stderr: f64,
    pub accuracies: Vec<f64>,
    pub bundle_seed: u64,
    pub fingerprint: String,
}

impl AccuracyReport {
    /// Mean and standard error of the mean (sample standard deviation over
    /// `sqrt(n)`; zero for a single run).
    pub fn summarize(accuracies: &[f64]) -> (f64, f64) {
        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        if accuracies.len() < 2 {
            return (mean, 0.0);
        }
        let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Config(format!("json: {e}")))?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn write_pca(
    path: &Path,
    fingerprint: &[u8; 32],
    labels: &[u32],
    scores: &hyperinr_core::Matrix,
) -> Result<()> {
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend((1..=scores.cols()).map(|k| format!("pc{k}")));
    let rows = (0..scores.rows()).map(|i| {
        let mut r = vec![
            i.to_string(),
            labels.get(i).map_or(String::new(), u32::to_string),
        ];
        r.extend(scores.row(i).iter().map(|&x| num(x)));
        r
    });
    write_atomic(path, &csv_bytes(fingerprint, &header, rows)?)
}

pub fn write_table(
    path: &Path,
    fingerprint: &[u8; 32],
    header: &[&str],
    rows: &[Vec<f64>],
) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    let rows = rows.iter().map(|r| r.iter().map(|&x| num(x)).collect());
    write_atomic(path, &csv_bytes(fingerprint, &header, rows)?)
}

/// Binary greyscale image; values are clamped to `[0, 1]`.
pub fn pgm_bytes(fingerprint: &[u8; 32], width: usize, height: usize, values: &[f64]) -> Vec<u8> {
    let mut out = format!(
        "P5\n# fingerprint {}\n{width} {height}\n255\n",
        hex(fingerprint)
    )
    .into_bytes();
    out.extend(
        values
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}
