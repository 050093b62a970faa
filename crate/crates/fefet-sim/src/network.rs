//! Software MLP with quantization-aware training.
//!
//! Shadow weights are real-valued and clipped to [-1, 1]; every forward
//! pass (training and inference) sees the quantized weights, and gradients
//! reach the shadows through a straight-through estimator. The quantized
//! values are the conductance fractions the target hardware can store, so
//! the trained network maps onto a crossbar without further rounding.

use ndarray::{s, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::rng::Stream;

#[derive(Debug, thiserror::Error)]
pub enum NetworkError {
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("input length {got} does not match layer input {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    BadConfig(String),
}

/// Output head / loss pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "cross-entropy-softmax")]
    CrossEntropySoftmax,
    #[serde(rename = "mse-sigmoid")]
    MseSigmoid,
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// MLP with per-layer shadow weight matrices of shape (fan_in + 1) x fan_out;
/// the extra row carries the bias weights driven by an always-on input.
#[derive(Debug, Clone)]
pub struct MLPModel {
    pub dims: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub levels: u8,
    pub fraction_set: Vec<f64>,
    pub loss: LossKind,
    pub seed: u64,
}

/// Hyperparameters for quantization-aware SGD.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub levels: u8,
    pub fraction_set: Vec<f64>,
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(NetworkError::BadConfig(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(NetworkError::BadConfig(format!(
                "learning_rate = {} must be positive",
                self.learning_rate
            )));
        }
        if self.levels != 2 && self.levels != 4 {
            return Err(NetworkError::BadConfig(format!(
                "levels = {} must be 2 or 4",
                self.levels
            )));
        }
        if self.fraction_set.len() != self.levels as usize {
            return Err(NetworkError::BadConfig(format!(
                "fraction_set has {} entries for {} levels",
                self.fraction_set.len(),
                self.levels
            )));
        }
        if self.fraction_set.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NetworkError::BadConfig(
                "fraction_set must be strictly increasing".into(),
            ));
        }
        if (self.fraction_set.last().unwrap() - 1.0).abs() > 1e-12 {
            return Err(NetworkError::BadConfig(
                "fraction_set must end at 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub test_accuracy: Vec<f64>,
}

impl MLPModel {
    /// Fresh model with uniform init in [-0.5, 0.5] / sqrt(fan_in).
    pub fn new(dims: &[usize], cfg: &TrainConfig) -> Self {
        let mut init = Stream::new(cfg.seed).derive(0);
        let mut weights = Vec::new();
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let mut w = Array2::zeros((fan_in + 1, fan_out));
            for v in w.iter_mut() {
                *v = init.next_range(-0.5, 0.5) * scale;
            }
            weights.push(w);
        }
        MLPModel {
            dims: dims.to_vec(),
            weights,
            levels: cfg.levels,
            fraction_set: cfg.fraction_set.clone(),
            loss: cfg.loss,
            seed: cfg.seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Quantized copies of every layer's shadow weights.
    pub fn quantized_weights(&self) -> Vec<Array2<f64>> {
        self.weights
            .iter()
            .map(|w| quantize_weights(w, &self.fraction_set, self.levels))
            .collect()
    }

    /// Class scores for one input; `quantized` selects the hardware-ready
    /// weights instead of the raw shadows.
    pub fn forward(&self, x: ArrayView1<f64>, quantized: bool) -> Result<Vec<f64>, NetworkError> {
        if x.len() != self.input_dim() {
            return Err(NetworkError::DimensionMismatch {
                got: x.len(),
                expected: self.input_dim(),
            });
        }
        let batch = x.insert_axis(Axis(0));
        let scores = self.forward_batch(&batch.to_owned(), quantized);
        Ok(scores.row(0).to_vec())
    }

    /// Batched forward pass; rows of `x` are samples. Returns class scores.
    pub fn forward_batch(&self, x: &Array2<f64>, quantized: bool) -> Array2<f64> {
        let mut act = x.clone();
        let last = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            let wq;
            let weights = if quantized {
                wq = quantize_weights(w, &self.fraction_set, self.levels);
                &wq
            } else {
                w
            };
            let z = augment(&act).dot(weights);
            act = if i < last { z.mapv(sigmoid) } else { z };
        }
        match self.loss {
            LossKind::CrossEntropySoftmax => act,
            LossKind::MseSigmoid => act.mapv(sigmoid),
        }
    }

    /// Argmax predictions over a batch, first index winning ties.
    pub fn predict_batch(&self, x: &Array2<f64>, quantized: bool) -> Vec<usize> {
        argmax_rows(&self.forward_batch(x, quantized))
    }
}

/// Append the always-on bias input as a final column.
pub fn augment(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut out = Array2::ones((n, d + 1));
    out.slice_mut(s![.., ..d]).assign(x);
    out
}

pub fn argmax_rows(scores: &Array2<f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Quantize shadow weights onto the achievable fraction ladder.
///
/// Two levels: sign(w) with sign(0) = +1. Four levels: nearest signed
/// fraction by value, ties resolved toward the larger magnitude.
pub fn quantize_weights(shadow: &Array2<f64>, fraction_set: &[f64], levels: u8) -> Array2<f64> {
    if levels == 2 {
        return shadow.mapv(|w| if w >= 0.0 { 1.0 } else { -1.0 });
    }
    shadow.mapv(|w| nearest_fraction(w, fraction_set))
}

fn nearest_fraction(w: f64, fraction_set: &[f64]) -> f64 {
    let mut best = fraction_set[0];
    let mut best_d = f64::INFINITY;
    for &f in fraction_set {
        for c in [f, -f] {
            let d = (w - c).abs();
            if d < best_d || (d == best_d && (c.abs() > best.abs() || (c.abs() == best.abs() && c > best))) {
                best = c;
                best_d = d;
            }
        }
    }
    best
}

/// Mean accuracy of an arbitrary forward function over a labeled dataset.
pub fn evaluate<F>(forward: F, dataset: &Dataset) -> Result<f64, NetworkError>
where
    F: Fn(ArrayView1<f64>) -> Vec<f64>,
{
    if dataset.is_empty() {
        return Err(NetworkError::EmptyDataset);
    }
    let mut correct = 0usize;
    for (x, &label) in dataset.images.rows().into_iter().zip(dataset.labels.iter()) {
        let scores = forward(x);
        let mut best = 0;
        for (i, &v) in scores.iter().enumerate() {
            if v > scores[best] {
                best = i;
            }
        }
        if best == label as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Accuracy of precomputed predictions.
pub fn accuracy_of(predictions: &[usize], labels: &[u8]) -> f64 {
    let correct = predictions
        .iter()
        .zip(labels.iter())
        .filter(|(p, l)| **p == **l as usize)
        .count();
    correct as f64 / labels.len() as f64
}

/// Loss and weight gradients for one batch.
///
/// With `quantized` set, the forward pass and the backward linearization
/// both use the quantized weights (straight-through estimation); the
/// returned gradients apply to the shadow weights.
pub fn batch_gradients(
    model: &MLPModel,
    x: &Array2<f64>,
    labels: &[u8],
    quantized: bool,
) -> (f64, Vec<Array2<f64>>) {
    let n = x.nrows() as f64;
    let effective: Vec<Array2<f64>> = if quantized {
        model.quantized_weights()
    } else {
        model.weights.clone()
    };

    // forward, keeping layer inputs for the backward pass
    let mut inputs = Vec::with_capacity(effective.len());
    let mut act = x.clone();
    let last = effective.len() - 1;
    for (i, w) in effective.iter().enumerate() {
        let xa = augment(&act);
        let z = xa.dot(w);
        inputs.push(xa);
        act = if i < last { z.mapv(sigmoid) } else { z };
    }
    let logits = act;

    // output delta and loss
    let classes = logits.ncols();
    let mut delta = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    match model.loss {
        LossKind::CrossEntropySoftmax => {
            for (r, row) in logits.rows().into_iter().enumerate() {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = row.iter().map(|&v| (v - m).exp()).collect();
                let z: f64 = exps.iter().sum();
                let y = labels[r] as usize;
                loss += -(exps[y] / z).ln();
                for c in 0..classes {
                    let p = exps[c] / z;
                    delta[(r, c)] = (p - if c == y { 1.0 } else { 0.0 }) / n;
                }
            }
        }
        LossKind::MseSigmoid => {
            for (r, row) in logits.rows().into_iter().enumerate() {
                let y = labels[r] as usize;
                for c in 0..classes {
                    let o = sigmoid(row[c]);
                    let t = if c == y { 1.0 } else { 0.0 };
                    loss += (o - t) * (o - t);
                    delta[(r, c)] = 2.0 * (o - t) * o * (1.0 - o) / n;
                }
            }
        }
    }
    loss /= n;

    // backward through the stack
    let mut grads = vec![Array2::zeros((0, 0)); effective.len()];
    let mut d = delta;
    for i in (0..effective.len()).rev() {
        grads[i] = inputs[i].t().dot(&d);
        if i > 0 {
            let upstream = d.dot(&effective[i].t());
            let h = inputs[i].slice(s![.., ..inputs[i].ncols() - 1]);
            d = &upstream.slice(s![.., ..h.ncols()]) * &h.mapv(|v| v * (1.0 - v));
        }
    }
    (loss, grads)
}

/// Mini-batch SGD with straight-through estimation.
///
/// Deterministic for a fixed config; returns the per-epoch mean training
/// loss and quantized test accuracy.
pub fn train(
    model: &mut MLPModel,
    train_set: &Dataset,
    test_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainHistory, NetworkError> {
    cfg.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(NetworkError::EmptyDataset);
    }
    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    let shuffler = Stream::new(cfg.seed).derive(1);
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let mut stream = shuffler.derive(epoch as u64);
        stream.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        let mut batches = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut x = Array2::zeros((chunk.len(), model.input_dim()));
            let mut labels = Vec::with_capacity(chunk.len());
            for (r, &idx) in chunk.iter().enumerate() {
                x.row_mut(r).assign(&train_set.images.row(idx));
                labels.push(train_set.labels[idx]);
            }
            let (loss, grads) = batch_gradients(model, &x, &labels, true);
            if !loss.is_finite() {
                return Err(NetworkError::Divergence { epoch, loss });
            }
            epoch_loss += loss;
            batches += 1.0;
            for (w, g) in model.weights.iter_mut().zip(grads.iter()) {
                ndarray::Zip::from(w).and(g).for_each(|w, &g| {
                    // straight-through estimator: no update outside the clip range
                    if w.abs() <= 1.0 {
                        *w -= cfg.learning_rate * g;
                    }
                    *w = w.clamp(-1.0, 1.0);
                });
            }
        }

        let predictions = model.predict_batch(&test_set.images, true);
        history.train_loss.push(epoch_loss / batches);
        history
            .test_accuracy
            .push(accuracy_of(&predictions, &test_set.labels));
    }
    Ok(history)
}
