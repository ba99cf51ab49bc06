//! Multinomial logistic regression fit by full-batch gradient descent.
//!
//! Loss is the mean cross-entropy
//! `L(W, b) = (1/n) Σ_i [ logsumexp(W x_i + b) − (W x_i + b)_{y_i} ]`
//! with gradient `∂L/∂W = (1/n) Σ_i (p_i − e_{y_i}) x_iᵀ` and
//! `∂L/∂b = (1/n) Σ_i (p_i − e_{y_i})`. Weights start at zero, so the fit is
//! deterministic and zero epochs give exactly uniform probabilities.

use crate::error::{Error, Result};
use crate::types::{softmax_slice, LogitVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    /// `K × d`, row `k` holds the weights of class `k`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    /// Training loss before each epoch's update, plus the final loss.
    pub loss_history: Vec<f64>,
}

/// Gradient of the mean cross-entropy, same layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl SoftmaxClassifier {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        SoftmaxClassifier {
            weights: vec![vec![0.0; dim]; num_classes],
            bias: vec![0.0; num_classes],
            loss_history: Vec::new(),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn raw_logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>() + b)
            .collect()
    }

    pub fn logits(&self, x: &[f64]) -> Result<LogitVector> {
        if x.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        LogitVector::new(self.raw_logits(x))
    }

    /// Mean cross-entropy and its gradient on `(features, labels)`.
    pub fn loss_and_gradient(&self, features: &[Vec<f64>], labels: &[usize]) -> (f64, Gradient) {
        let (k, d) = (self.num_classes(), self.dim());
        let n = features.len() as f64;
        let mut grad = Gradient {
            weights: vec![vec![0.0; d]; k],
            bias: vec![0.0; k],
        };
        let mut loss = 0.0;
        for (x, &y) in features.iter().zip(labels) {
            let z = self.raw_logits(x);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - z[y];
            let p = softmax_slice(&z);
            for (c, pc) in p.iter().enumerate() {
                let r = pc - f64::from(u8::from(c == y));
                grad.bias[c] += r / n;
                for (g, xi) in grad.weights[c].iter_mut().zip(x) {
                    *g += r * xi / n;
                }
            }
        }
        (loss / n, grad)
    }

    pub fn loss(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        self.loss_and_gradient(features, labels).0
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        let hits = features
            .iter()
            .zip(labels)
            .filter(|(x, &y)| {
                let z = self.raw_logits(x);
                let best = (0..z.len()).fold(0, |b, i| if z[i] > z[b] { i } else { b });
                best == y
            })
            .count();
        hits as f64 / features.len() as f64
    }
}

fn validate(features: &[Vec<f64>], labels: &[usize], num_classes: usize, cfg: &TrainConfig) -> Result<usize> {
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(Error::Config(format!(
            "learning rate must be > 0, got {}",
            cfg.learning_rate
        )));
    }
    if num_classes < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
    }
    if features.is_empty() || features.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows and {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|x| x.len() != dim || x.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("ragged or non-finite feature rows".into()));
    }
    if let Some(y) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::InvalidInput(format!(
            "label {y} out of range for {num_classes} classes"
        )));
    }
    Ok(dim)
}

pub fn train_softmax_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<SoftmaxClassifier> {
    let dim = validate(features, labels, num_classes, cfg)?;
    let mut model = SoftmaxClassifier::zeros(num_classes, dim);
    let lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        let (loss, grad) = model.loss_and_gradient(features, labels);
        if !loss.is_finite() {
            return Err(Error::Training { epoch, loss });
        }
        model.loss_history.push(loss);
        for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
            for (wi, gi) in w.iter_mut().zip(g) {
                *wi -= lr * gi;
            }
        }
        for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * g;
        }
    }
    let final_loss = model.loss(features, labels);
    if !final_loss.is_finite() {
        return Err(Error::Training {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }
    model.loss_history.push(final_loss);
    Ok(model)
}
