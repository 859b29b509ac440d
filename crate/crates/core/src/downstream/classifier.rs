//! ReLU MLP classifier with softmax cross-entropy.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Uniform};

use crate::adam::AdamState;
use crate::error::{check_len, Error, Result};
use crate::init;
use crate::layers::{relu_backward, relu_inplace, Dense};
use crate::linalg::{MatView, Matrix};
use crate::math;

const STREAM_INIT: u64 = 11;
const STREAM_SHUFFLE: u64 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128, 128],
            epochs: 150,
            batch_size: 128,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Per-feature z-score from training statistics. Constant features keep
/// unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let (t, f) = (x.rows(), x.cols());
        let mut mean = vec![0.0; f];
        for r in 0..t {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= t.max(1) as f64;
        }
        let mut var = vec![0.0; f];
        for r in 0..t {
            for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = math::sqrt(s / t.max(1) as f64);
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, row: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.std) {
            *o = (v - m) / s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub input_dim: usize,
    pub classes: usize,
    pub hidden: Vec<usize>,
    pub params: Vec<f64>,
    pub scaler: Standardizer,
}

fn plan(input_dim: usize, hidden: &[usize], classes: usize) -> Vec<Dense> {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut fan_in = input_dim;
    let mut offset = 0;
    for &fan_out in hidden.iter().chain(core::iter::once(&classes)) {
        let d = Dense {
            fan_in,
            fan_out,
            offset,
        };
        offset += d.len();
        layers.push(d);
        fan_in = fan_out;
    }
    layers
}

impl ClassifierModel {
    /// `(fan_in, fan_out)` of every hidden layer after the first.
    pub fn hidden_shapes(&self) -> Vec<(usize, usize)> {
        plan(self.input_dim, &self.hidden, self.classes)
            .iter()
            .skip(1)
            .take(self.hidden.len().saturating_sub(1))
            .map(|d| (d.fan_in, d.fan_out))
            .collect()
    }

    /// Logits for already standardized rows (`rows × input_dim`).
    fn logits(&self, x: &[f64], rows: usize, acts: &mut Vec<Vec<f64>>) -> Vec<f64> {
        let layers = plan(self.input_dim, &self.hidden, self.classes);
        acts.resize_with(self.hidden.len(), Vec::new);
        let mut out = vec![0.0; rows * self.classes];
        for (i, layer) in layers.iter().enumerate() {
            let input = if i == 0 {
                MatView::new(x, rows, layer.fan_in)
            } else {
                MatView::new(&acts[i - 1], rows, layer.fan_in)
            };
            if i == self.hidden.len() {
                layer.forward(&self.params, input, &mut out, layer.fan_out);
            } else {
                let mut h = vec![0.0; rows * layer.fan_out];
                layer.forward(&self.params, input, &mut h, layer.fan_out);
                relu_inplace(&mut h);
                acts[i] = h;
            }
        }
        out
    }

    /// Logits of one raw feature vector.
    pub fn predict_logits(&self, feature: &[f64]) -> Result<Vec<f64>> {
        check_len("classifier input", self.input_dim, feature.len())?;
        let mut x = vec![0.0; self.input_dim];
        self.scaler.apply(feature, &mut x);
        Ok(self.logits(&x, 1, &mut Vec::new()))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&x| math::exp(x - max)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Predicted class and class probabilities.
pub fn classify(model: &ClassifierModel, feature: &[f64]) -> Result<(usize, Vec<f64>)> {
    let p = softmax(&model.predict_logits(feature)?);
    Ok((argmax(&p), p))
}

/// Top-1 accuracy in `[0, 1]`.
pub fn accuracy(model: &ClassifierModel, features: &Matrix, labels: &[u32]) -> Result<f64> {
    check_len("label count", features.rows(), labels.len())?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for (r, &y) in labels.iter().enumerate() {
        if classify(model, features.row(r))?.0 == y as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Trains with Adam on mean cross-entropy. Returns the model and the mean
/// training loss per epoch.
pub fn train_classifier(
    features: &Matrix,
    labels: &[u32],
    cfg: &ClassifierConfig,
) -> Result<(ClassifierModel, Vec<f64>)> {
    let (t, f) = (features.rows(), features.cols());
    check_len("label count", t, labels.len())?;
    if !features.is_finite() {
        return Err(Error::Numeric("non-finite classifier feature".into()));
    }
    let classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let distinct = {
        let mut seen = vec![false; classes];
        labels.iter().for_each(|&y| seen[y as usize] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::Config(
            "classification needs at least two classes".into(),
        ));
    }
    if cfg.batch_size == 0 || cfg.hidden.contains(&0) {
        return Err(Error::Config(
            "classifier widths and batch size must be positive".into(),
        ));
    }

    let layers = plan(f, &cfg.hidden, classes);
    let k: usize = layers.iter().map(Dense::len).sum();
    let mut rng = init::rng(cfg.seed, STREAM_INIT);
    let mut params = vec![0.0; k];
    for layer in &layers {
        let bound = 1.0 / math::sqrt(layer.fan_in as f64);
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        for p in &mut params[layer.offset..layer.offset + layer.len()] {
            *p = dist.sample(&mut rng);
        }
    }
    let scaler = Standardizer::fit(features);
    let mut x = vec![0.0; t * f];
    for r in 0..t {
        scaler.apply(features.row(r), &mut x[r * f..(r + 1) * f]);
    }
    let mut model = ClassifierModel {
        input_dim: f,
        classes,
        hidden: cfg.hidden.clone(),
        params,
        scaler,
    };

    let mut adam = AdamState::new(k);
    let mut grad = vec![0.0; k];
    let mut order: Vec<usize> = (0..t).collect();
    let mut shuffle = init::rng(cfg.seed, STREAM_SHUFFLE);
    let mut xb = Vec::new();
    let mut acts = Vec::new();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let n_hidden = cfg.hidden.len();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            xb.clear();
            for &r in chunk {
                xb.extend_from_slice(&x[r * f..(r + 1) * f]);
            }
            let logits = model.logits(&xb, b, &mut acts);
            // dL/dlogits of the mean cross-entropy.
            let mut dout = vec![0.0; b * classes];
            for (i, &r) in chunk.iter().enumerate() {
                let p = softmax(&logits[i * classes..(i + 1) * classes]);
                let y = labels[r] as usize;
                epoch_loss -= math::ln(p[y].max(f64::MIN_POSITIVE));
                for (c, pc) in p.iter().enumerate() {
                    dout[i * classes + c] = (pc - if c == y { 1.0 } else { 0.0 }) / b as f64;
                }
            }
            for i in (0..layers.len()).rev() {
                let layer = &layers[i];
                let input = if i == 0 {
                    MatView::new(&xb, b, f)
                } else {
                    MatView::new(&acts[i - 1], b, layer.fan_in)
                };
                let d = MatView::new(&dout, b, layer.fan_out);
                layer.weight_grad(input, d, &mut grad);
                if i > 0 {
                    let mut dx = vec![0.0; b * layer.fan_in];
                    layer.input_grad(&model.params, d, 0.0, &mut dx, layer.fan_in);
                    relu_backward(&mut dx, &acts[i - 1]);
                    dout = dx;
                }
            }
            debug_assert_eq!(acts.len(), n_hidden);
            adam.step("classifier", &mut model.params, &grad, cfg.lr)?;
        }
        losses.push(epoch_loss / t as f64);
    }
    Ok((model, losses))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_and_ties() {
        assert_eq!(argmax(&softmax(&[0.0, 0.0, 0.0])), 0);
        let p = softmax(&[10.0, 0.0, 0.0]);
        assert!(p[0] > 0.99);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Matrix::zeros(3, 2);
        assert!(matches!(
            train_classifier(&x, &[1, 1, 1], &ClassifierConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn separable_clusters_are_learned() {
        let mut rng = init::rng(3, 0);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        let centers = [[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (k, c) in centers.iter().enumerate() {
            for _ in 0..40 {
                rows.push([
                    c[0] + normal.sample(&mut rng),
                    c[1] + normal.sample(&mut rng),
                ]);
                labels.push(k as u32);
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = ClassifierConfig {
            hidden: vec![16, 16],
            epochs: 40,
            batch_size: 32,
            ..ClassifierConfig::default()
        };
        let (model, losses) = train_classifier(&x, &labels, &cfg).unwrap();
        assert!(losses.last().unwrap() < &losses[0]);
        assert_eq!(accuracy(&model, &x, &labels).unwrap(), 1.0);
        assert_eq!(model.hidden_shapes(), [(16, 16)]);
    }
}
