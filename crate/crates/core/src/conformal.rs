//! Split-conformal calibration and set construction.
//!
//! With `n` calibration scores and miscoverage `α` the threshold is the
//! `k`-th smallest score, `k = ⌈(1 − α)(n + 1)⌉`, or `+∞` when `k > n`. A
//! label enters the prediction set when its score is `≤` the threshold.
//! Under exchangeability of calibration and test points this gives
//! `P(y ∈ C(x)) ≥ 1 − α`.

use std::fmt;

use crate::entropy::{er_probability, er_score_all_labels, ErConfig};
use crate::error::{Error, Result};
use crate::scores::{score_all_labels, ScoreSpec};
use crate::types::{softmax, LabeledExample, LogitVector, PredictionSet};

/// A conformity score applied to logits: a baseline score on `softmax(z)` or
/// an entropy-reweighted score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConformityScore {
    Base(ScoreSpec),
    Reweighted(ErConfig),
}

impl ConformityScore {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConformityScore::Base(s) => s.validate(),
            ConformityScore::Reweighted(c) => c.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConformityScore::Base(s) => s.name(),
            ConformityScore::Reweighted(_) => "er",
        }
    }

    pub fn score(&self, z: &LogitVector, y: usize, u: f64) -> f64 {
        match self {
            ConformityScore::Base(s) => s.score(&softmax(z), y, u),
            ConformityScore::Reweighted(c) => c.base.score(&er_probability(z, c), y, u),
        }
    }

    pub fn score_all(&self, z: &LogitVector, u: f64) -> Vec<f64> {
        match self {
            ConformityScore::Base(s) => score_all_labels(&softmax(z), u, s),
            ConformityScore::Reweighted(c) => er_score_all_labels(z, u, c),
        }
    }

    /// Scores of each example at its own true label.
    pub fn calibration_scores(&self, examples: &[LabeledExample]) -> Vec<f64> {
        examples
            .iter()
            .map(|e| self.score(&e.logits, e.label, e.u))
            .collect()
    }
}

impl From<ScoreSpec> for ConformityScore {
    fn from(s: ScoreSpec) -> Self {
        ConformityScore::Base(s)
    }
}

impl From<ErConfig> for ConformityScore {
    fn from(c: ErConfig) -> Self {
        ConformityScore::Reweighted(c)
    }
}

impl fmt::Display for ConformityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConformityScore::Base(s) => write!(f, "{s}"),
            ConformityScore::Reweighted(c) => write!(f, "er(T={},base={})", c.temperature, c.base),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Score threshold; `+∞` when the calibration set is too small for `α`.
    pub threshold: f64,
    pub alpha: f64,
    pub n_cal: usize,
    pub num_classes: usize,
    pub score: ConformityScore,
}

pub fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// 1-based order-statistic index `⌈(1 − α)(n + 1)⌉`.
///
/// A slack of 1e-9 absorbs rounding in the product, so `α = 0.05, n = 19`
/// gives exactly 19.
pub fn quantile_rank(n: usize, alpha: f64) -> usize {
    let x = (1.0 - alpha) * (n as f64 + 1.0);
    ((x - 1e-9).ceil() as usize).max(1)
}

/// Conformal threshold from raw calibration scores.
pub fn calibrate_scores(scores: &[f64], alpha: f64) -> Result<f64> {
    validate_alpha(alpha)?;
    if scores.is_empty() {
        return Err(Error::Calibration("no calibration scores".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Calibration("calibration score is NaN".into()));
    }
    let k = quantile_rank(scores.len(), alpha);
    if k > scores.len() {
        return Ok(f64::INFINITY);
    }
    let mut buf = scores.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// Scores every calibration example at its true label and computes the threshold.
pub fn calibrate(
    examples: &[LabeledExample],
    score: ConformityScore,
    alpha: f64,
) -> Result<CalibrationResult> {
    score.validate()?;
    let num_classes = match examples.first() {
        Some(e) => e.num_classes(),
        None => return Err(Error::Calibration("empty calibration set".into())),
    };
    if let Some(bad) = examples.iter().find(|e| e.num_classes() != num_classes) {
        return Err(Error::Shape {
            expected: num_classes,
            got: bad.num_classes(),
        });
    }
    let threshold = calibrate_scores(&score.calibration_scores(examples), alpha)?;
    Ok(CalibrationResult {
        threshold,
        alpha,
        n_cal: examples.len(),
        num_classes,
        score,
    })
}

/// `{ y : score(z, y, u) ≤ threshold }`.
pub fn predict_set(z: &LogitVector, u: f64, cal: &CalibrationResult) -> Result<PredictionSet> {
    if z.num_classes() != cal.num_classes {
        return Err(Error::Shape {
            expected: cal.num_classes,
            got: z.num_classes(),
        });
    }
    if cal.threshold == f64::INFINITY {
        return Ok(PredictionSet::full(cal.num_classes));
    }
    let members = cal
        .score
        .score_all(z, u)
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= cal.threshold)
        .map(|(y, _)| y)
        .collect();
    Ok(PredictionSet::new(members))
}

/// Fraction of `test` examples whose label lands in their prediction set.
pub fn coverage_check(cal: &CalibrationResult, test: &[LabeledExample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let mut covered = 0usize;
    for e in test {
        if predict_set(&e.logits, e.u, cal)?.contains(e.label) {
            covered += 1;
        }
    }
    Ok(covered as f64 / test.len() as f64)
}
