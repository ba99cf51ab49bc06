//! Entropy-reweighted probabilities and conformity scores.
//!
//! Logits are divided by `max(H(x), ε) · T`, where `H(x)` is the Shannon
//! entropy (nats) of `softmax(z)` and `T > 0` is a temperature, and the result
//! is pushed back through the softmax:
//!
//! ```text
//! z̃_k = z_k / (max(H, ε) · T)
//! f̃   = softmax(z̃)
//! ```
//!
//! Confident predictions (low entropy) are sharpened and uncertain ones are
//! flattened. The floor `ε` keeps the divisor positive for saturated
//! classifiers whose entropy rounds to zero. The reweighted vector is then
//! scored with a base conformity score, APS by default.

use crate::error::{Error, Result};
use crate::scores::{score_all_labels, ScoreSpec};
use crate::types::{softmax_slice, LogitVector, ProbVector};

pub const DEFAULT_ENTROPY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErConfig {
    pub temperature: f64,
    pub entropy_floor: f64,
    /// Score applied to the reweighted probabilities.
    pub base: ScoreSpec,
}

impl ErConfig {
    pub fn new(temperature: f64) -> Result<Self> {
        Self::with_base(temperature, ScoreSpec::aps())
    }

    pub fn with_base(temperature: f64, base: ScoreSpec) -> Result<Self> {
        let cfg = ErConfig {
            temperature,
            entropy_floor: DEFAULT_ENTROPY_FLOOR,
            base,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if !(self.entropy_floor.is_finite() && self.entropy_floor > 0.0) {
            return Err(Error::Config(format!(
                "entropy floor must be > 0, got {}",
                self.entropy_floor
            )));
        }
        self.base.validate()
    }

    fn divisor(&self, h: f64) -> f64 {
        h.max(self.entropy_floor) * self.temperature
    }
}

/// Shannon entropy in nats, with `0 · log 0 = 0`.
pub fn entropy(p: &ProbVector) -> f64 {
    -p.as_slice()
        .iter()
        .filter(|&&pk| pk > 0.0)
        .map(|&pk| pk * pk.ln())
        .sum::<f64>()
}

/// Entropy of `softmax(z)` via `H = log Σ exp z_j − Σ f_k z_k`.
///
/// Evaluated on max-subtracted logits, so it is exact for any finite input
/// and invariant to constant shifts.
pub fn entropy_from_logits(z: &LogitVector) -> f64 {
    let v = z.as_slice();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let log_total = total.ln();
    let weighted: f64 = exps.iter().zip(v).map(|(e, x)| e / total * (x - max)).sum();
    (log_total - weighted).max(0.0)
}

/// `z / (max(H(z), ε) · T)`.
///
/// For extreme logits combined with a near-zero entropy the quotient can
/// leave the finite range; [`er_probability`] does not go through this
/// function and stays well defined in that case.
pub fn reweight_logits(z: &LogitVector, cfg: &ErConfig) -> LogitVector {
    let d = cfg.divisor(entropy_from_logits(z));
    LogitVector::from_raw(z.as_slice().iter().map(|v| v / d).collect())
}

/// `softmax(reweight_logits(z, cfg))`.
///
/// The max logit is subtracted before dividing, which leaves the softmax
/// unchanged and keeps every reweighted entry in `[-inf, 0]`.
pub fn er_probability(z: &LogitVector, cfg: &ErConfig) -> ProbVector {
    let v = z.as_slice();
    let d = cfg.divisor(entropy_from_logits(z));
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = v.iter().map(|x| (x - max) / d).collect();
    ProbVector::new(softmax_slice(&scaled)).expect("softmax output lies on the simplex")
}

/// Base score of label `y` on the reweighted probabilities.
pub fn er_conformity_score(z: &LogitVector, y: usize, u: f64, cfg: &ErConfig) -> f64 {
    cfg.base.score(&er_probability(z, cfg), y, u)
}

/// Reweighted scores of every label with a shared `u`.
pub fn er_score_all_labels(z: &LogitVector, u: f64, cfg: &ErConfig) -> Vec<f64> {
    score_all_labels(&er_probability(z, cfg), u, &cfg.base)
}
