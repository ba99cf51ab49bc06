//! Conformal prediction sets for classifiers.
//!
//! The crate works on classifier logits. It provides the usual split-conformal
//! machinery (threshold calibration and set construction), the standard
//! conformity scores (THR, APS, RAPS, SAPS, RANK), and an entropy-reweighted
//! score where logits are divided by `H(x) * T` before the softmax. The
//! temperature `T` is chosen on a validation split by minimising the average
//! prediction-set size, after which the threshold is recalibrated on the pooled
//! calibration data.
//!
//! Module map:
//!
//! - [`types`]: logit/probability vectors, labeled examples, splits, sets, RNG streams
//! - [`scores`]: the baseline conformity scores
//! - [`entropy`]: entropy, logit reweighting and the reweighted score
//! - [`conformal`]: quantile calibration and set construction
//! - [`temperature`]: temperature sweep, selection and the end-to-end pipeline
//! - [`metrics`]: coverage/size metrics and the repeated-split evaluation harness
//! - [`data`]: CSV ingestion and reports, synthetic data, a small softmax trainer
//! - [`cli`]: the `erconf` command-line frontend

pub mod cli;
pub mod conformal;
pub mod data;
pub mod entropy;
pub mod error;
pub mod metrics;
pub mod scores;
pub mod temperature;
pub mod types;

pub use conformal::{calibrate, coverage_check, predict_set, CalibrationResult, ConformityScore};
pub use entropy::{
    entropy, entropy_from_logits, er_conformity_score, er_probability, reweight_logits, ErConfig,
};
pub use error::{Error, Result};
pub use scores::{ScoreKind, ScoreSpec};
pub use temperature::{run_pipeline, SweepResult, TemperatureGrid};
pub use types::{
    rank_of_label, softmax, three_way_split, LabeledExample, LogitVector, PredictionSet,
    ProbVector, RandomSource, ScoredExample, ThreeWaySplit,
};
