//! Temperature selection for the entropy-reweighted score.
//!
//! The pipeline:
//!
//! 1. split the labeled data into `D1` (training), `D2` (score calibration)
//!    and `D3` (temperature validation);
//! 2. obtain logits for `D2`, `D3` and the unlabeled points, either from a
//!    model trained on `D1` or from precomputed logits (then `D1 = ∅`);
//! 3. for every grid temperature `T`, calibrate the reweighted score on `D2`
//!    and measure the average prediction-set size on `D3`;
//! 4. keep the temperature `T*` with the smallest average size;
//! 5. recalibrate with `T*` on `D2 ∪ D3` and build the final sets.

use rayon::prelude::*;
use rand::Rng;

use crate::conformal::{calibrate, predict_set, validate_alpha, CalibrationResult, ConformityScore};
use crate::data::trainer::{train_softmax_classifier, TrainConfig};
use crate::entropy::ErConfig;
use crate::error::{Error, Result};
use crate::scores::ScoreSpec;
use crate::types::{
    random_partition, stream, three_way_split, LabeledExample, LogitVector, PredictionSet,
    RandomSource, ThreeWaySplit,
};

/// Strictly increasing list of positive temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureGrid {
    values: Vec<f64>,
}

impl TemperatureGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("temperature grid is empty".into()));
        }
        if values.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config(format!(
                "temperatures must be finite and > 0: {values:?}"
            )));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "temperature grid must be strictly increasing: {values:?}"
            )));
        }
        Ok(TemperatureGrid { values })
    }

    /// `count` log-spaced values over `[min, max]`.
    ///
    /// When 1.0 lies in the range it is always part of the grid: a point
    /// within 1e-9 of it is snapped to exactly 1.0, otherwise 1.0 is inserted
    /// (giving `count + 1` values).
    pub fn log_spaced(min: f64, max: f64, count: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min > 0.0 && max >= min) {
            return Err(Error::Config(format!(
                "invalid temperature range [{min}, {max}]"
            )));
        }
        if count == 0 || (count == 1 && min != max) || (count > 1 && min == max) {
            return Err(Error::Config(format!(
                "invalid temperature count {count} for range [{min}, {max}]"
            )));
        }
        let (lo, hi) = (min.ln(), max.ln());
        let mut values: Vec<f64> = if count == 1 {
            vec![min]
        } else {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count)
                .map(|i| {
                    if i + 1 == count {
                        max
                    } else if i == 0 {
                        min
                    } else {
                        (lo + step * i as f64).exp()
                    }
                })
                .collect()
        };
        if (min..=max).contains(&1.0) {
            match values.iter().position(|t| (t - 1.0).abs() < 1e-9) {
                Some(i) => values[i] = 1.0,
                None => {
                    let at = values.partition_point(|t| *t < 1.0);
                    values.insert(at, 1.0);
                }
            }
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl Default for TemperatureGrid {
    /// 41 log-spaced temperatures over `[0.05, 20]`, including 1.0.
    fn default() -> Self {
        Self::log_spaced(0.05, 20.0, 41).expect("default grid is valid")
    }
}

/// Outcome of one grid temperature on the validation split.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub temperature: f64,
    /// Sum of set sizes over `D3`; the selection compares these exactly.
    pub total_size: usize,
    pub avg_size: f64,
    pub coverage_d3: f64,
    /// Threshold calibrated on `D2`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub per_t: Vec<SweepPoint>,
    pub t_star: f64,
    /// Calibration with `T*` on `D2 ∪ D3`.
    pub final_calibration: CalibrationResult,
}

impl SweepResult {
    pub fn point(&self, temperature: f64) -> Option<&SweepPoint> {
        self.per_t.iter().find(|p| p.temperature == temperature)
    }
}

fn evaluate_temperature(
    d2: &[LabeledExample],
    d3: &[LabeledExample],
    alpha: f64,
    temperature: f64,
    base: ScoreSpec,
) -> Result<SweepPoint> {
    let cfg = ErConfig::with_base(temperature, base)?;
    let cal = calibrate(d2, cfg.into(), alpha)?;
    let mut total_size = 0;
    let mut covered = 0;
    for e in d3 {
        let set = predict_set(&e.logits, e.u, &cal)?;
        total_size += set.len();
        covered += usize::from(set.contains(e.label));
    }
    Ok(SweepPoint {
        temperature,
        total_size,
        avg_size: total_size as f64 / d3.len() as f64,
        coverage_d3: covered as f64 / d3.len() as f64,
        threshold: cal.threshold,
    })
}

/// Index of the smallest average size; ties go to the temperature closest to
/// 1.0 in log scale, then to the smaller temperature.
fn select_temperature(points: &[SweepPoint]) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        let b = &points[best];
        let better = match p.total_size.cmp(&b.total_size) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => {
                let (dp, db) = (p.temperature.ln().abs(), b.temperature.ln().abs());
                dp < db || (dp == db && p.temperature < b.temperature)
            }
        };
        if better {
            best = i;
        }
    }
    best
}

/// Runs the temperature sweep on `(D2, D3)`, selects `T*` and recalibrates on
/// `D2 ∪ D3`.
pub fn sweep_temperatures(
    d2: &[LabeledExample],
    d3: &[LabeledExample],
    alpha: f64,
    grid: &TemperatureGrid,
    base: ScoreSpec,
) -> Result<SweepResult> {
    validate_alpha(alpha)?;
    base.validate()?;
    if grid.is_empty() {
        return Err(Error::Config("temperature grid is empty".into()));
    }
    if d2.is_empty() || d3.is_empty() {
        return Err(Error::InvalidInput(format!(
            "temperature sweep needs nonempty D2 and D3 (got {} and {})",
            d2.len(),
            d3.len()
        )));
    }
    let per_t = grid
        .values()
        .par_iter()
        .map(|&t| evaluate_temperature(d2, d3, alpha, t, base))
        .collect::<Result<Vec<_>>>()?;
    let t_star = per_t[select_temperature(&per_t)].temperature;

    let union: Vec<LabeledExample> = d2.iter().chain(d3).cloned().collect();
    let final_calibration = finalize(&union, t_star, alpha, base)?;
    Ok(SweepResult {
        per_t,
        t_star,
        final_calibration,
    })
}

/// Reweighted scores with `t_star` on the pooled calibration data and the
/// conformal threshold at `alpha`.
pub fn finalize(
    d2_union_d3: &[LabeledExample],
    t_star: f64,
    alpha: f64,
    base: ScoreSpec,
) -> Result<CalibrationResult> {
    let cfg = ErConfig::with_base(t_star, base)?;
    calibrate(d2_union_d3, ConformityScore::Reweighted(cfg), alpha)
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub grid: TemperatureGrid,
    pub base: ScoreSpec,
    /// Fractions for `(D1, D2, D3)`. `D1` is ignored for precomputed logits.
    pub fractions: (f64, f64, f64),
}

impl PipelineConfig {
    pub fn new(alpha: f64) -> Self {
        PipelineConfig {
            alpha,
            grid: TemperatureGrid::default(),
            base: ScoreSpec::aps(),
            fractions: (0.5, 0.25, 0.25),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub split: ThreeWaySplit,
    pub sweep: SweepResult,
    /// Randomizers drawn for the unlabeled points, in input order.
    pub unlabeled_u: Vec<f64>,
    pub sets: Vec<PredictionSet>,
}

fn draw_uniforms(rng: &RandomSource, n: usize) -> Vec<f64> {
    let mut r = rng.rng();
    (0..n).map(|_| r.random::<f64>()).collect()
}

fn finish(
    split: ThreeWaySplit,
    d2: Vec<LabeledExample>,
    d3: Vec<LabeledExample>,
    unlabeled: &[LogitVector],
    cfg: &PipelineConfig,
    rng: &RandomSource,
) -> Result<PipelineOutput> {
    let sweep = sweep_temperatures(&d2, &d3, cfg.alpha, &cfg.grid, cfg.base)?;
    let unlabeled_u = draw_uniforms(&rng.derive(stream::RANDOMIZER, 1), unlabeled.len());
    let sets = unlabeled
        .par_iter()
        .zip(unlabeled_u.par_iter())
        .map(|(z, &u)| predict_set(z, u, &sweep.final_calibration))
        .collect::<Result<Vec<_>>>()?;
    Ok(PipelineOutput {
        split,
        sweep,
        unlabeled_u,
        sets,
    })
}

/// The full pipeline on precomputed logits: `D1` is empty and the labeled
/// examples are split between `D2` and `D3` in the ratio `f2 : f3`.
pub fn run_pipeline(
    labeled: &[LabeledExample],
    unlabeled: &[LogitVector],
    cfg: &PipelineConfig,
    rng: &RandomSource,
) -> Result<PipelineOutput> {
    let (_, f2, f3) = cfg.fractions;
    if !(f2 > 0.0 && f3 > 0.0) {
        return Err(Error::Config(format!(
            "D2 and D3 fractions must be > 0, got ({f2}, {f3})"
        )));
    }
    let fr = [0.0, f2 / (f2 + f3), f3 / (f2 + f3)];
    let mut parts = random_partition(labeled.len(), &fr, &rng.derive(stream::SPLIT, 0))?;
    let (i3, i2, i1) = (parts.pop().unwrap_or_default(), parts.pop().unwrap_or_default(), parts.pop().unwrap_or_default());
    if i2.is_empty() || i3.is_empty() {
        return Err(Error::Split {
            n: labeled.len(),
            parts: 2,
            fractions: fr[1..].to_vec(),
        });
    }
    let d2 = i2.iter().map(|&i| labeled[i].clone()).collect();
    let d3 = i3.iter().map(|&i| labeled[i].clone()).collect();
    finish(ThreeWaySplit { i1, i2, i3 }, d2, d3, unlabeled, cfg, rng)
}

/// The full pipeline including training: a softmax classifier is fit on `D1`
/// and its logits feed the sweep.
pub fn run_pipeline_with_training(
    features: &[Vec<f64>],
    labels: &[usize],
    unlabeled: &[Vec<f64>],
    num_classes: usize,
    train: &TrainConfig,
    cfg: &PipelineConfig,
    rng: &RandomSource,
) -> Result<PipelineOutput> {
    if features.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let split = three_way_split(features.len(), cfg.fractions, &rng.derive(stream::SPLIT, 0))?;
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
        idx.iter().map(|&i| (features[i].clone(), labels[i])).unzip()
    };
    let (x1, y1) = pick(&split.i1);
    let model = train_softmax_classifier(&x1, &y1, num_classes, train)?;

    let u = draw_uniforms(&rng.derive(stream::RANDOMIZER, 0), features.len());
    let examples = |idx: &[usize]| -> Result<Vec<LabeledExample>> {
        idx.iter()
            .map(|&i| LabeledExample::new(model.logits(&features[i])?, labels[i], u[i]))
            .collect()
    };
    let d2 = examples(&split.i2)?;
    let d3 = examples(&split.i3)?;
    let unlabeled_logits = unlabeled
        .iter()
        .map(|x| model.logits(x))
        .collect::<Result<Vec<_>>>()?;
    finish(split, d2, d3, &unlabeled_logits, cfg, rng)
}
