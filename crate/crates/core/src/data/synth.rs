//! Synthetic classification data with known posteriors.
//!
//! Features come from a mixture of `K` unit-variance spherical Gaussians with
//! means `s · e_k` (`s` = class separation) and equal priors. The Bayes
//! posterior is then `softmax(s · x_{0..K})`, and the emitted logits are
//! `overconfidence × log posterior`. An overconfidence of 1 gives a perfectly
//! calibrated classifier; values above 1 sharpen it.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::io::{LogitRow, LogitTable};
use crate::error::{Error, Result};
use crate::types::{softmax_slice, stream, LogitVector, ProbVector, RandomSource};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub n: usize,
    pub class_separation: f64,
    pub overconfidence: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(num_classes: usize, n: usize, seed: u64) -> Self {
        SynthSpec {
            num_classes,
            dim: num_classes,
            n,
            class_separation: 2.0,
            overconfidence: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        if self.dim < self.num_classes {
            return Err(Error::Config(format!(
                "dimension {} must be at least the class count {}",
                self.dim, self.num_classes
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("sample count must be > 0".into()));
        }
        for (name, v) in [
            ("class separation", self.class_separation),
            ("overconfidence", self.overconfidence),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub table: LogitTable,
    /// Exact Bayes posteriors, row-aligned with `table`.
    pub posteriors: Vec<ProbVector>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// Features, label, logits and posterior of one draw.
type Sample = (Vec<f64>, usize, Vec<f64>, Vec<f64>);

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let base = RandomSource::new(spec.seed);
    let k = spec.num_classes;
    let samples: Vec<Sample> = (0..spec.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = base.derive(stream::DATA, i as u64).rng();
            let label = rng.random_range(0..k);
            let x: Vec<f64> = (0..spec.dim)
                .map(|j| {
                    let mean = if j == label { spec.class_separation } else { 0.0 };
                    mean + rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            let scores: Vec<f64> = x[..k].iter().map(|v| spec.class_separation * v).collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + scores.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let logits: Vec<f64> = scores.iter().map(|v| spec.overconfidence * (v - lse)).collect();
            let posterior = softmax_slice(&scores);
            (x, label, logits, posterior)
        })
        .collect();

    let mut table = LogitTable::new(k)?;
    let mut posteriors = Vec::with_capacity(spec.n);
    let mut features = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    for (x, y, z, p) in samples {
        table.push(LogitRow {
            label: Some(y),
            logits: LogitVector::new(z)?,
        })?;
        posteriors.push(ProbVector::new(p)?);
        features.push(x);
        labels.push(y);
    }
    Ok(SyntheticData {
        table,
        posteriors,
        features,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::softmax;

    #[test]
    fn calibrated_logits_reproduce_posteriors() {
        let d = generate_synthetic(&SynthSpec::new(5, 500, 1)).unwrap();
        for (row, p) in d.table.rows().iter().zip(&d.posteriors) {
            let q = softmax(&row.logits);
            for (a, b) in q.as_slice().iter().zip(p.as_slice()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn overconfidence_sharpens_the_top_class() {
        let mut spec = SynthSpec::new(4, 300, 2);
        spec.overconfidence = 3.0;
        let d = generate_synthetic(&spec).unwrap();
        for (row, p) in d.table.rows().iter().zip(&d.posteriors) {
            let q = softmax(&row.logits);
            let top = p.argmax();
            assert_eq!(q.argmax(), top);
            let uniform = p.as_slice().iter().all(|v| (v - p.as_slice()[0]).abs() < 1e-12);
            if !uniform {
                assert!(q.as_slice()[top] > p.as_slice()[top]);
            }
        }
    }

    #[test]
    fn large_separation_is_nearly_perfect() {
        let mut spec = SynthSpec::new(5, 2000, 3);
        spec.class_separation = 10.0;
        let d = generate_synthetic(&spec).unwrap();
        let acc = d
            .posteriors
            .iter()
            .zip(&d.labels)
            .filter(|(p, y)| p.argmax() == **y)
            .count() as f64
            / 2000.0;
        assert!(acc > 0.99, "accuracy {acc}");
    }

    #[test]
    fn posteriors_are_calibrated() {
        let d = generate_synthetic(&SynthSpec::new(4, 20000, 4)).unwrap();
        let (mut hits, mut total) = (0usize, 0usize);
        for (p, y) in d.posteriors.iter().zip(&d.labels) {
            let top = p.as_slice()[p.argmax()];
            if (0.8..=0.9).contains(&top) {
                total += 1;
                hits += usize::from(p.argmax() == *y);
            }
        }
        assert!(total >= 500, "only {total} samples in the bin");
        let acc = hits as f64 / total as f64;
        assert!((0.78..=0.92).contains(&acc), "bin accuracy {acc}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthSpec::new(3, 100, 9);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a.table, b.table);
        assert_eq!(a.features, b.features);
    }

    #[test]
    fn invalid_specs() {
        let mut s = SynthSpec::new(3, 10, 0);
        s.overconfidence = 0.0;
        assert!(generate_synthetic(&s).is_err());
        let mut s = SynthSpec::new(3, 10, 0);
        s.dim = 2;
        assert!(s.validate().is_err());
        assert!(SynthSpec::new(1, 10, 0).validate().is_err());
        assert!(SynthSpec::new(3, 0, 0).validate().is_err());
    }
}
