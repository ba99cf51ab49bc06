//! Evaluation metrics and the repeated random-split harness.
//!
//! Each trial draws a fresh split of the labeled pool into a held-out test
//! part and two calibration parts (`D2`, `D3`). Baseline scores calibrate on
//! `D2 ∪ D3`; the entropy-reweighted method selects its temperature on
//! `(D2, D3)` and then calibrates on the same union, so every method sees the
//! same calibration and test points.

use rayon::prelude::*;
use rand::Rng;

use crate::conformal::{calibrate, predict_set, validate_alpha};
use crate::entropy::entropy_from_logits;
use crate::error::{Error, Result};
use crate::scores::ScoreSpec;
use crate::temperature::{sweep_temperatures, SweepResult, TemperatureGrid};
use crate::types::{random_partition, stream, LabeledExample, LogitVector, PredictionSet, RandomSource};

/// Counts for the correctness × entropy breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScenarioCounts {
    pub correct_low: usize,
    pub correct_high: usize,
    pub incorrect_low: usize,
    pub incorrect_high: usize,
}

impl ScenarioCounts {
    pub fn total(&self) -> usize {
        self.correct_low + self.correct_high + self.incorrect_low + self.incorrect_high
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalRow {
    pub dataset: String,
    pub score: String,
    pub alpha: f64,
    pub trial: usize,
    pub coverage: f64,
    pub avg_size: f64,
    /// Per-class coverage; `None` for classes absent from the test split.
    pub label_coverage: Vec<Option<f64>>,
    pub scenarios: ScenarioCounts,
    /// Selected temperature for the reweighted method.
    pub t_star: Option<f64>,
}

pub fn empirical_coverage(sets: &[PredictionSet], labels: &[usize]) -> Result<f64> {
    if sets.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} sets but {} labels",
            sets.len(),
            labels.len()
        )));
    }
    if sets.is_empty() {
        return Err(Error::InvalidInput("no prediction sets".into()));
    }
    let hits = sets.iter().zip(labels).filter(|(s, y)| s.contains(**y)).count();
    Ok(hits as f64 / sets.len() as f64)
}

pub fn average_size(sets: &[PredictionSet]) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::InvalidInput("no prediction sets".into()));
    }
    Ok(sets.iter().map(PredictionSet::len).sum::<usize>() as f64 / sets.len() as f64)
}

/// Coverage restricted to each true class.
pub fn label_conditional_coverage(
    sets: &[PredictionSet],
    labels: &[usize],
    num_classes: usize,
) -> Result<Vec<Option<f64>>> {
    if sets.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} sets but {} labels",
            sets.len(),
            labels.len()
        )));
    }
    let mut counts = vec![(0usize, 0usize); num_classes];
    for (s, &y) in sets.iter().zip(labels) {
        let slot = counts.get_mut(y).ok_or_else(|| {
            Error::InvalidInput(format!("label {y} out of range for {num_classes} classes"))
        })?;
        slot.1 += 1;
        slot.0 += usize::from(s.contains(y));
    }
    Ok(counts
        .into_iter()
        .map(|(hit, n)| (n > 0).then(|| hit as f64 / n as f64))
        .collect())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Splits examples by whether the argmax is correct and whether the predictive
/// entropy is low (`H ≤ threshold`). The threshold defaults to the median entropy.
pub fn scenario_breakdown(examples: &[(LogitVector, usize)], entropy_threshold: Option<f64>) -> ScenarioCounts {
    let mut counts = ScenarioCounts::default();
    if examples.is_empty() {
        return counts;
    }
    let h: Vec<f64> = examples.iter().map(|(z, _)| entropy_from_logits(z)).collect();
    let threshold = entropy_threshold.unwrap_or_else(|| median(&h));
    for ((z, y), h) in examples.iter().zip(h) {
        let low = h <= threshold;
        match (z.argmax() == *y, low) {
            (true, true) => counts.correct_low += 1,
            (true, false) => counts.correct_high += 1,
            (false, true) => counts.incorrect_low += 1,
            (false, false) => counts.incorrect_high += 1,
        }
    }
    counts
}

/// A method evaluated by [`run_trials`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Plain split conformal with a baseline score.
    Baseline(ScoreSpec),
    /// Entropy reweighting with temperature selected on `(D2, D3)`.
    EntropyReweighted { base: ScoreSpec },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Baseline(s) => s.name(),
            Method::EntropyReweighted { .. } => "er",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub dataset: String,
    pub trials: usize,
    pub alphas: Vec<f64>,
    pub methods: Vec<Method>,
    /// Fractions for `(test, D2, D3)`.
    pub fractions: (f64, f64, f64),
    pub grid: TemperatureGrid,
    pub seed: u64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("need at least one trial".into()));
        }
        if self.alphas.is_empty() || self.methods.is_empty() {
            return Err(Error::Config("need at least one alpha and one score".into()));
        }
        for &a in &self.alphas {
            validate_alpha(a)?;
        }
        for m in &self.methods {
            match m {
                Method::Baseline(s) | Method::EntropyReweighted { base: s } => s.validate()?,
            }
        }
        let mut names: Vec<&str> = self.methods.iter().map(Method::name).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate score in {names:?}")));
        }
        Ok(())
    }
}

/// The temperature sweep of one `(trial, alpha)` pair.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub trial: usize,
    pub alpha: f64,
    pub sweep: SweepResult,
}

#[derive(Debug, Clone, Default)]
pub struct TrialOutput {
    /// Sorted by `(score, alpha, trial)`.
    pub rows: Vec<EvalRow>,
    /// Sorted by `(trial, alpha)`.
    pub sweeps: Vec<SweepRecord>,
}

fn run_one_trial(
    pool: &[(LogitVector, usize)],
    cfg: &TrialConfig,
    trial: usize,
    num_classes: usize,
) -> Result<TrialOutput> {
    let base = RandomSource::new(cfg.seed);
    let (ft, f2, f3) = cfg.fractions;
    let mut parts = random_partition(pool.len(), &[ft, f2, f3], &base.derive(stream::SPLIT, trial as u64))?;
    if parts.iter().any(Vec::is_empty) {
        return Err(Error::Split {
            n: pool.len(),
            parts: 3,
            fractions: vec![ft, f2, f3],
        });
    }
    let mut rng = base.derive(stream::RANDOMIZER, trial as u64).rng();
    let u: Vec<f64> = (0..pool.len()).map(|_| rng.random::<f64>()).collect();
    let examples = |idx: &[usize]| -> Vec<LabeledExample> {
        idx.iter()
            .map(|&i| LabeledExample {
                logits: pool[i].0.clone(),
                label: pool[i].1,
                u: u[i],
            })
            .collect()
    };
    let d3 = examples(&parts.pop().unwrap_or_default());
    let d2 = examples(&parts.pop().unwrap_or_default());
    let test = examples(&parts.pop().unwrap_or_default());
    let union: Vec<LabeledExample> = d2.iter().chain(&d3).cloned().collect();
    let test_labels: Vec<usize> = test.iter().map(|e| e.label).collect();
    let test_pairs: Vec<(LogitVector, usize)> = test.iter().map(|e| (e.logits.clone(), e.label)).collect();
    let scenarios = scenario_breakdown(&test_pairs, None);

    let mut out = TrialOutput::default();
    for method in &cfg.methods {
        for &alpha in &cfg.alphas {
            let (cal, t_star) = match method {
                Method::Baseline(spec) => (calibrate(&union, (*spec).into(), alpha)?, None),
                Method::EntropyReweighted { base } => {
                    let sweep = sweep_temperatures(&d2, &d3, alpha, &cfg.grid, *base)?;
                    let cal = sweep.final_calibration.clone();
                    let t = sweep.t_star;
                    out.sweeps.push(SweepRecord { trial, alpha, sweep });
                    (cal, Some(t))
                }
            };
            let sets = test
                .iter()
                .map(|e| predict_set(&e.logits, e.u, &cal))
                .collect::<Result<Vec<_>>>()?;
            out.rows.push(EvalRow {
                dataset: cfg.dataset.clone(),
                score: method.name().to_string(),
                alpha,
                trial,
                coverage: empirical_coverage(&sets, &test_labels)?,
                avg_size: average_size(&sets)?,
                label_coverage: label_conditional_coverage(&sets, &test_labels, num_classes)?,
                scenarios,
                t_star,
            });
        }
    }
    Ok(out)
}

/// Runs every `(method, alpha)` pair on `cfg.trials` independent random
/// splits of `pool`. Trial `t` derives its split and randomizers from
/// `(cfg.seed, t)`, so the output does not depend on thread scheduling.
pub fn run_trials(pool: &[(LogitVector, usize)], cfg: &TrialConfig) -> Result<TrialOutput> {
    cfg.validate()?;
    let num_classes = match pool.first() {
        Some((z, _)) => z.num_classes(),
        None => return Err(Error::InvalidInput("empty labeled pool".into())),
    };
    if let Some((z, _)) = pool.iter().find(|(z, _)| z.num_classes() != num_classes) {
        return Err(Error::Shape {
            expected: num_classes,
            got: z.num_classes(),
        });
    }
    if let Some((_, y)) = pool.iter().find(|(_, y)| *y >= num_classes) {
        return Err(Error::InvalidInput(format!(
            "label {y} out of range for {num_classes} classes"
        )));
    }
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_one_trial(pool, cfg, t, num_classes))
        .collect::<Result<Vec<_>>>()?;

    let mut out = TrialOutput::default();
    for t in per_trial {
        out.rows.extend(t.rows);
        out.sweeps.extend(t.sweeps);
    }
    out.rows.sort_by(|a, b| {
        a.score
            .cmp(&b.score)
            .then_with(|| a.alpha.total_cmp(&b.alpha))
            .then_with(|| a.trial.cmp(&b.trial))
    });
    out.sweeps
        .sort_by(|a, b| a.trial.cmp(&b.trial).then_with(|| a.alpha.total_cmp(&b.alpha)));
    Ok(out)
}

/// Mean and sample standard deviation of coverage and size across trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub score: String,
    pub alpha: f64,
    pub trials: usize,
    pub coverage_mean: f64,
    pub coverage_sd: f64,
    pub size_mean: f64,
    pub size_sd: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One summary row per `(dataset, score, alpha)`, in the order rows first appear.
pub fn summarize(rows: &[EvalRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(&str, &str, f64)> = Vec::new();
    for r in rows {
        let key = (r.dataset.as_str(), r.score.as_str(), r.alpha);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(dataset, score, alpha)| {
            let group: Vec<&EvalRow> = rows
                .iter()
                .filter(|r| r.dataset == dataset && r.score == score && r.alpha == alpha)
                .collect();
            let cov: Vec<f64> = group.iter().map(|r| r.coverage).collect();
            let size: Vec<f64> = group.iter().map(|r| r.avg_size).collect();
            let (coverage_mean, coverage_sd) = mean_sd(&cov);
            let (size_mean, size_sd) = mean_sd(&size);
            SummaryRow {
                dataset: dataset.to_string(),
                score: score.to_string(),
                alpha,
                trials: group.len(),
                coverage_mean,
                coverage_sd,
                size_mean,
                size_sd,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(m: &[usize]) -> PredictionSet {
        PredictionSet::new(m.to_vec())
    }

    #[test]
    fn coverage_examples() {
        let full = vec![PredictionSet::full(3); 4];
        assert_eq!(empirical_coverage(&full, &[0, 1, 2, 0]).unwrap(), 1.0);
        let empty = vec![PredictionSet::default(); 4];
        assert_eq!(empirical_coverage(&empty, &[0, 1, 2, 0]).unwrap(), 0.0);
        let mixed = vec![set(&[0]), set(&[1, 2]), set(&[2]), set(&[1])];
        assert_eq!(empirical_coverage(&mixed, &[0, 1, 2, 0]).unwrap(), 0.75);
        assert!(empirical_coverage(&mixed, &[0, 1]).is_err());
        assert!(empirical_coverage(&[], &[]).is_err());
    }

    #[test]
    fn size_examples() {
        assert_eq!(average_size(&[set(&[0]), set(&[1]), set(&[2])]).unwrap(), 1.0);
        let s = average_size(&[set(&[0]), set(&[1]), set(&[1, 2])]).unwrap();
        assert!((s - 4.0 / 3.0).abs() < 1e-15);
        assert!(average_size(&[]).is_err());
    }

    #[test]
    fn label_conditional_examples() {
        let sets = vec![set(&[0]), set(&[0]), set(&[1]), set(&[0])];
        let labels = [0, 0, 1, 1];
        let lc = label_conditional_coverage(&sets, &labels, 3).unwrap();
        assert_eq!(lc, vec![Some(1.0), Some(0.5), None]);
    }

    #[test]
    fn label_conditional_is_consistent_with_marginal() {
        let sets = vec![set(&[0, 1]), set(&[2]), set(&[1]), set(&[0]), set(&[])];
        let labels = [1, 2, 0, 0, 2];
        let lc = label_conditional_coverage(&sets, &labels, 3).unwrap();
        let mut weighted = 0.0;
        for (c, cov) in lc.iter().enumerate() {
            let count = labels.iter().filter(|y| **y == c).count() as f64;
            weighted += count * cov.unwrap_or(0.0);
        }
        let marginal = empirical_coverage(&sets, &labels).unwrap();
        assert!((weighted / labels.len() as f64 - marginal).abs() < 1e-12);
    }

    fn lv(v: &[f64]) -> LogitVector {
        LogitVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn scenario_examples() {
        let confident: Vec<(LogitVector, usize)> = (0..5).map(|_| (lv(&[900.0, 0.0, 0.0]), 0)).collect();
        let c = scenario_breakdown(&confident, Some(0.5));
        assert_eq!(c.correct_low, 5);
        assert_eq!(c.total(), 5);

        let k = 4;
        let uniform: Vec<(LogitVector, usize)> = (0..6).map(|_| (lv(&[0.0; 4]), 1)).collect();
        let c = scenario_breakdown(&uniform, Some((k as f64).ln() - 1e-3));
        assert_eq!(c.incorrect_high, 6);
    }

    #[test]
    fn median_threshold_halves_the_data() {
        for n in [7usize, 8] {
            let ex: Vec<(LogitVector, usize)> = (0..n).map(|i| (lv(&[i as f64 * 0.3, 0.0, -0.2]), i % 3)).collect();
            let c = scenario_breakdown(&ex, None);
            assert_eq!(c.correct_low + c.incorrect_low, n.div_ceil(2));
            assert_eq!(c.total(), n);
        }
    }

    #[test]
    fn summary_statistics() {
        let mk = |cov: f64, size: f64, trial: usize| EvalRow {
            dataset: "d".into(),
            score: "aps".into(),
            alpha: 0.1,
            trial,
            coverage: cov,
            avg_size: size,
            ..EvalRow::default()
        };
        let s = summarize(&[mk(0.9, 1.0, 0), mk(0.8, 2.0, 1), mk(1.0, 3.0, 2)]);
        assert_eq!(s.len(), 1);
        assert!((s[0].coverage_mean - 0.9).abs() < 1e-12);
        assert!((s[0].coverage_sd - 0.1).abs() < 1e-12);
        assert!((s[0].size_sd - 1.0).abs() < 1e-12);
        assert_eq!(s[0].trials, 3);
    }

    #[test]
    fn config_validation() {
        let cfg = TrialConfig {
            dataset: "d".into(),
            trials: 1,
            alphas: vec![0.1],
            methods: vec![Method::Baseline(ScoreSpec::aps()), Method::Baseline(ScoreSpec::aps())],
            fractions: (0.5, 0.25, 0.25),
            grid: TemperatureGrid::default(),
            seed: 0,
        };
        assert!(cfg.validate().is_err());
        let ok = TrialConfig {
            methods: vec![Method::Baseline(ScoreSpec::aps())],
            ..cfg.clone()
        };
        assert!(ok.validate().is_ok());
        assert!(TrialConfig { alphas: vec![1.0], ..ok.clone() }.validate().is_err());
        assert!(TrialConfig { trials: 0, ..ok }.validate().is_err());
    }
}
